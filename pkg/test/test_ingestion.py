import datetime
import filecmp
import os
import tempfile
import time

from absl.testing import absltest, parameterized
import numpy as np
import pandas as pd

from climact.common.exceptions import ValidationError
from climact.data.ingestion import (MediaSeries, georeference, iso_week_label, load_dataset, media_features,
                                    parse_iso_week, read_catalog, save_dataset, split_windows, zscore)
from climact.model.sampler import default_parameters, forward_sample, synthetic_catalog
from climact.model.types import THEMES

FIRST_MONDAY = datetime.date(2018, 9, 24)
N_WEEKS = 53  # through Monday 2019-09-23


def media_frame(values_by_area, n_weeks=N_WEEKS, skip=()):
    """values_by_area: area -> f(i) returning the three theme values of week i."""
    rows = []
    for area, values in values_by_area.items():
        for i in range(n_weeks):
            if i in skip:
                continue
            label = iso_week_label(FIRST_MONDAY + datetime.timedelta(weeks=i))
            for theme, value in zip(THEMES, values(i)):
                rows.append({'area': area, 'iso_week': label, 'theme': theme, 'attention': value})
    return pd.DataFrame(rows)

ramp = lambda i: (0.01 * i, 0.01 * i + 0.1, 0.005 * i)
flat = lambda level: (lambda i: (level, level, level))


def write(path, text):
    with open(path, 'w') as f:
        f.write(text)
    return path

CATALOG = """name,affluence,partisanship,gender,age,popularity_z
r/a,1.0,-0.5,0.0,0.3,-0.5
r/b,0.0,0.5,-1.0,0.0,0.0
r/c,-1.0,0.0,1.0,-0.3,1.0
"""
OVERRIDES = ','.join('M_L_' + t for t in THEMES) + ',' + ','.join('M_S_' + t for t in THEMES)


class TestZScore(parameterized.TestCase):
    def test_known_values(self):
        z = zscore([2, 4, 4, 4, 5, 5, 7, 9])
        np.testing.assert_allclose(z, np.array([-3, -1, -1, -1, 0, 0, 2, 4]) / np.sqrt(32 / 7), rtol=1e-12)
        self.assertAlmostEqual(z.mean(), 0.0, places=12)
        self.assertAlmostEqual(z.std(ddof=1), 1.0, places=12)

    @parameterized.parameters(([1.0],), ([3.0, 3.0, 3.0],), ([],))
    def test_rejects(self, values):
        with self.assertRaises(ValidationError):
            zscore(values)


class TestWindows(parameterized.TestCase):
    def test_with_gap(self):
        w = split_windows('2019-09-27')
        self.assertEqual(w.t_0, datetime.date(2018, 9, 28))
        self.assertEqual(w.long_term, (datetime.date(2018, 9, 28), datetime.date(2019, 8, 23)))
        self.assertEqual(w.short_term, (datetime.date(2019, 9, 20), datetime.date(2019, 9, 27)))
        self.assertTrue(w.gap_enabled)

    def test_without_gap(self):
        w = split_windows(datetime.date(2019, 9, 27), gap_enabled=False)
        self.assertEqual(w.long_term[1], datetime.date(2019, 9, 20))
        self.assertEqual(w.long_term[1], w.short_term[0])

    def test_invalid_timestamp(self):
        with self.assertRaises(ValidationError):
            split_windows('not a date')

    def test_iso_weeks(self):
        self.assertEqual(parse_iso_week('2019-W39'), datetime.date(2019, 9, 23))
        self.assertEqual(iso_week_label(datetime.date(2019, 9, 23)), '2019-W39')
        with self.assertRaises(ValidationError):
            parse_iso_week('2019-39')


class TestGeoreference(parameterized.TestCase):
    location_map = {'r/sf': 'CA', 'r/bayarea': 'CA', 'r/nyc': 'NY'}

    @parameterized.parameters(
        (['r/sf', 'r/bayarea'], 'CA'),
        (['r/bayarea', 'r/sf'], 'CA'),
        (['r/sf', 'r/unknown'], 'CA'),
        (['r/sf', 'r/nyc'], None),
        (['r/unknown'], None),
        ([], None),
    )
    def test_single_area(self, subs, expected):
        self.assertEqual(georeference(subs, self.location_map), expected)


class TestMediaFeatures(parameterized.TestCase):
    def test_constant_series(self):
        series = MediaSeries(media_frame({'X': flat(0.2)}))
        M_L, M_S = media_features(series, 'X', split_windows('2019-09-27'))
        np.testing.assert_allclose(M_L, 0.2, rtol=1e-12)
        np.testing.assert_allclose(M_S, 0.2, rtol=1e-12)

    def test_cross_area_median(self):
        series = MediaSeries(media_frame({'X': flat(0.1), 'Y': flat(0.3), 'Z': flat(0.5)}))
        M_L, M_S = media_features(series, None, split_windows('2019-09-27'))
        np.testing.assert_allclose(M_L, 0.3, rtol=1e-12)
        np.testing.assert_allclose(M_S, 0.3, rtol=1e-12)
        self.assertEqual(series.areas, ('X', 'Y', 'Z'))

    def test_hand_computed_means(self):
        series = MediaSeries(media_frame({'X': ramp}))
        M_L, M_S = media_features(series, 'X', split_windows('2019-09-27'))
        np.testing.assert_allclose(M_L, [0.24, 0.34, 0.12], rtol=1e-12)
        np.testing.assert_allclose(M_S, [0.52, 0.62, 0.26], rtol=1e-12)
        M_L, M_S = media_features(series, 'X', split_windows('2019-09-27', gap_enabled=False))
        self.assertAlmostEqual(M_L[0], 0.26, places=12)
        np.testing.assert_allclose(M_S, [0.52, 0.62, 0.26], rtol=1e-12)

    def test_window_not_covered(self):
        series = MediaSeries(media_frame({'X': ramp}))
        with self.assertRaises(ValidationError):
            media_features(series, 'X', split_windows('2020-06-01'))

    def test_unknown_area(self):
        series = MediaSeries(media_frame({'X': ramp}))
        with self.assertRaises(ValidationError):
            series.weekly('Y')

    def test_rejects_gaps_in_weeks(self):
        with self.assertRaises(ValidationError):
            MediaSeries(media_frame({'X': ramp}, skip=(10,)))

    def test_rejects_out_of_range_attention(self):
        frame = media_frame({'X': ramp})
        frame.loc[5, 'attention'] = 1.5
        with self.assertRaises(ValidationError):
            MediaSeries(frame)

    def test_rejects_missing_theme(self):
        frame = media_frame({'X': ramp})
        with self.assertRaises(ValidationError):
            MediaSeries(frame[frame['theme'] != 'climate'].iloc[1:])
        with self.assertRaises(ValidationError):
            MediaSeries(frame.assign(theme=frame['theme'].replace('climate', 'weather')))


class TestLoadDataset(parameterized.TestCase):
    def setUp(self):
        super(TestLoadDataset, self).setUp()
        self.tmp = self.create_tempdir().full_path
        self.catalog_path = write(os.path.join(self.tmp, 'catalog.csv'), CATALOG)

    def users(self, body, header='user_id,A,I,E_L,E_S,P_L,P_S,' + OVERRIDES):
        return write(os.path.join(self.tmp, 'users.csv'), header + '\n' + body)

    def test_clean_fixture(self):
        users = self.users('u1,1,0,0.5,0.4,101,100,0.1,0.2,0.3,0.4,0.5,0.6\n'
                           'u2,0,1,-0.5,-0.2,010,011,0,0,0,0,0,0\n'
                           'u3,1,1,1.5,1.1,111,001,-1,-1,-1,1,1,1\n')
        loaded = load_dataset(self.catalog_path, users)
        self.assertEqual(loaded.diagnostics, [])
        self.assertLen(loaded.observations, 3)
        first = loaded.observations[0]
        self.assertEqual(first.user_id, 'u1')
        np.testing.assert_array_equal(first.P_L, [1, 0, 1])
        np.testing.assert_array_equal(first.M_S, [0.4, 0.5, 0.6])
        self.assertEqual(loaded.catalog.names, ('r/a', 'r/b', 'r/c'))

    def test_wrong_participation_length_names_user(self):
        users = self.users('u1,1,0,0.5,0.4,101,100,0,0,0,0,0,0\n'
                           'bad_user,0,1,0.5,0.4,10,100,0,0,0,0,0,0\n')
        with self.assertRaisesRegex(ValidationError, 'bad_user'):
            load_dataset(self.catalog_path, users)

    def test_duplicate_user(self):
        users = self.users('u1,1,0,0.5,0.4,101,100,0,0,0,0,0,0\n'
                           'u1,0,1,0.5,0.4,101,100,0,0,0,0,0,0\n')
        with self.assertRaisesRegex(ValidationError, 'line 3'):
            load_dataset(self.catalog_path, users)

    @parameterized.parameters(
        'u1,2,0,0.5,0.4,101,100,0,0,0,0,0,0\n',
        'u1,1,0,abc,0.4,101,100,0,0,0,0,0,0\n',
        'u1,1,0,0.5,0.4,1x1,100,0,0,0,0,0,0\n',
        'u1,1,0,0.5,0.4,101,100,0,0,,0,0,0\n',
        'u1,1,0,0.5,0.4,101,100,,,,,,\n',
    )
    def test_rejects_bad_rows(self, body):
        with self.assertRaises(ValidationError):
            load_dataset(self.catalog_path, self.users(body))

    def test_missing_file(self):
        with self.assertRaises(ValidationError):
            load_dataset(os.path.join(self.tmp, 'nope.csv'), self.users(''))

    def test_duplicate_subreddit(self):
        path = write(os.path.join(self.tmp, 'dup.csv'), CATALOG + 'r/a,0,0,0,0,0\n')
        with self.assertRaisesRegex(ValidationError, 'line 5'):
            read_catalog(path)

    def test_large_catalog_is_fast(self):
        rng = np.random.default_rng(0)
        lines = ['name,affluence,partisanship,gender,age,popularity_z']
        for k in range(826):
            lines.append('r/sub{:04d},'.format(k) + ','.join('{:.6f}'.format(x) for x in rng.normal(size=5)))
        path = write(os.path.join(self.tmp, 'big.csv'), '\n'.join(lines) + '\n')
        start = time.perf_counter()
        catalog = read_catalog(path)
        self.assertLess(time.perf_counter() - start, 1.0)
        self.assertEqual(catalog.K, 826)

    def test_media_derived_features(self):
        media = os.path.join(self.tmp, 'media.csv')
        media_frame({'CA': ramp, 'NY': flat(0.2)}).to_csv(media, index=False)
        locations = write(os.path.join(self.tmp, 'locations.csv'), 'subreddit,area\nr/sf,CA\nr/bayarea,CA\n')
        users = self.users('u1,1,0,0.5,0.4,101,100,,r/sf;r/bayarea,2019-09-27\n'
                           'u2,0,1,-0.5,-0.2,010,011,NY,,2019-09-27\n'
                           'u3,1,1,1.5,1.1,111,001,TX,,2019-09-27\n',
                           header='user_id,A,I,E_L,E_S,P_L,P_S,location,location_subreddits,t_A')
        loaded = load_dataset(self.catalog_path, users, media_path=media, location_map_path=locations)
        self.assertEqual(loaded.observations[0].location, 'CA')
        self.assertLen(loaded.diagnostics, 1)
        self.assertIn('TX', loaded.diagnostics[0])
        M_L = np.stack([o.M_L for o in loaded.observations])
        M_S = np.stack([o.M_S for o in loaded.observations])
        np.testing.assert_allclose(M_L[:, 0], [1, -1, 0], atol=1e-9)
        np.testing.assert_allclose(M_L[:, 2], [-1, 1, 0], atol=1e-9)
        np.testing.assert_allclose(M_S[:, 1], [1, -1, 0], atol=1e-9)

    def test_constant_media_column(self):
        media = os.path.join(self.tmp, 'media.csv')
        media_frame({'CA': flat(0.2)}).to_csv(media, index=False)
        users = self.users('u1,1,0,0.5,0.4,101,100,CA,2019-09-27\n'
                           'u2,0,1,-0.5,-0.2,010,011,CA,2019-09-27\n',
                           header='user_id,A,I,E_L,E_S,P_L,P_S,location,t_A')
        loaded = load_dataset(self.catalog_path, users, media_path=media)
        self.assertLen(loaded.diagnostics, 6)
        for obs in loaded.observations:
            np.testing.assert_array_equal(obs.M_L, 0.0)

    def test_media_needs_series(self):
        users = self.users('u1,1,0,0.5,0.4,101,100,CA,2019-09-27\n',
                           header='user_id,A,I,E_L,E_S,P_L,P_S,location,t_A')
        with self.assertRaises(ValidationError):
            load_dataset(self.catalog_path, users)

    def test_interactions_override(self):
        users = self.users('u1,1,0,0.5,0.4,101,100,0,0,0,0,0,0\n'
                           'u2,0,1,-0.5,-0.2,010,011,0,0,0,0,0,0\n')
        interactions = write(os.path.join(self.tmp, 'interactions.csv'), 'user_id,I\nu1,1\nu9,0\n')
        loaded = load_dataset(self.catalog_path, users, interactions_path=interactions)
        self.assertEqual([o.I for o in loaded.observations], [1, 1])
        self.assertLen(loaded.diagnostics, 1)
        self.assertIn('u9', loaded.diagnostics[0])


class TestSaveDataset(parameterized.TestCase):
    def test_round_trip(self):
        catalog = synthetic_catalog(6, seed=1)
        observations, _ = forward_sample(default_parameters(), catalog, n_users=40, seed=2)
        with tempfile.TemporaryDirectory() as tmp:
            first, second = os.path.join(tmp, 'a'), os.path.join(tmp, 'b')
            save_dataset(first, catalog, observations)
            loaded = load_dataset(os.path.join(first, 'catalog.csv'), os.path.join(first, 'users.csv'))
            save_dataset(second, loaded.catalog, loaded.observations)
            for name in ('catalog.csv', 'users.csv'):
                self.assertTrue(filecmp.cmp(os.path.join(first, name), os.path.join(second, name), shallow=False))

        np.testing.assert_array_equal(loaded.catalog.D_sub, catalog.D_sub)
        np.testing.assert_array_equal(loaded.catalog.N_sub, catalog.N_sub)
        for original, read in zip(observations, loaded.observations):
            for name in ('P_L', 'P_S', 'M_L', 'M_S', 'E_L', 'E_S', 'I', 'A'):
                np.testing.assert_array_equal(getattr(read, name), getattr(original, name))

    def test_media_written(self):
        series = MediaSeries(media_frame({'X': ramp}))
        catalog = synthetic_catalog(3)
        observations, _ = forward_sample(default_parameters(), catalog, n_users=3, seed=0)
        with tempfile.TemporaryDirectory() as tmp:
            paths = save_dataset(tmp, catalog, observations, media=series)
            self.assertLen(paths, 3)
            again = MediaSeries.from_csv(os.path.join(tmp, 'media.csv'))
        pd.testing.assert_frame_equal(again.table, series.table)


if __name__ == '__main__':
    absltest.main()
