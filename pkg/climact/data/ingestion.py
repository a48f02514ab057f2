"""Catalog, user table and media series loading.

File schemas (UTF-8, comma separated, '.' decimal):

    catalog.csv   name, affluence, partisanship, gender, age, popularity_z
    users.csv     user_id, A, I, E_L, E_S, P_L, P_S
                  [location] [location_subreddits] [t_A]
                  [M_L_<theme> ... M_S_<theme>]  (all six or none)
    media.csv     area, iso_week (YYYY-Www), theme, attention
    interactions  user_id, I
    locations     subreddit, area

P_L and P_S are bitstrings of length K in catalog order. location_subreddits is a
';' separated list resolved through the locations file.
"""
import datetime
import os
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from climact.common.exceptions import ValidationError
from climact.model.types import AXES, THEMES, SubredditCatalog, UserObservation

WEEK = datetime.timedelta(weeks=1)
YEAR_WEEKS = 52
GAP_WEEKS = 4

CATALOG_COLUMNS = ('name',) + AXES + ('popularity_z',)
USER_COLUMNS = ('user_id', 'A', 'E_L', 'E_S', 'P_L', 'P_S')
MEDIA_COLUMNS = ('area', 'iso_week', 'theme', 'attention')
MEDIA_OVERRIDES = tuple('M_L_' + t for t in THEMES) + tuple('M_S_' + t for t in THEMES)


def zscore(values):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValidationError("zscore needs a vector of length >= 2, got shape {}".format(values.shape))
    sd = values.std(ddof=1)
    if not sd > 0:
        raise ValidationError("zscore of a zero-variance vector")
    return (values - values.mean()) / sd


class TemporalWindows(NamedTuple):
    t_A: datetime.date
    t_0: datetime.date
    long_term: Tuple[datetime.date, datetime.date]
    short_term: Tuple[datetime.date, datetime.date]
    gap_enabled: bool


def _as_date(value):
    if isinstance(value, datetime.datetime):
        return value.date()
    if isinstance(value, datetime.date):
        return value
    try:
        return pd.Timestamp(value).date()
    except (ValueError, TypeError) as e:
        raise ValidationError("invalid timestamp {!r}: {}".format(value, e))

def split_windows(t_A, gap_enabled=True) -> TemporalWindows:
    t_A = _as_date(t_A)
    t_0 = t_A - YEAR_WEEKS * WEEK
    short_start = t_A - WEEK
    long_end = t_A - (GAP_WEEKS + 1) * WEEK if gap_enabled else short_start
    return TemporalWindows(t_A=t_A, t_0=t_0, long_term=(t_0, long_end), short_term=(short_start, t_A),
                           gap_enabled=bool(gap_enabled))


def georeference(user_location_subreddits, location_map) -> Optional[str]:
    """The single area all of a user's location subreddits map to, else None."""
    areas = {location_map[s] for s in user_location_subreddits if s in location_map}
    if len(areas) == 1:
        return areas.pop()
    return None


def parse_iso_week(label):
    """'2019-W38' -> Monday of that ISO week."""
    try:
        year, week = str(label).strip().upper().split('-W')
        return datetime.date.fromisocalendar(int(year), int(week), 1)
    except ValueError:
        raise ValidationError("invalid ISO week {!r}, expected YYYY-Www".format(label))

def iso_week_label(monday):
    year, week, _ = monday.isocalendar()
    return '{:04d}-W{:02d}'.format(year, week)


class MediaSeries:
    """Weekly share of news per (area, theme); one row per area and ISO week."""
    def __init__(self, frame: pd.DataFrame, path=None):
        missing = [c for c in MEDIA_COLUMNS if c not in frame.columns]
        if missing:
            raise ValidationError("media series is missing columns {}".format(missing), path=path)
        frame = frame.loc[:, list(MEDIA_COLUMNS)].copy()
        frame['area'] = frame['area'].astype(str)
        frame['week'] = [parse_iso_week(w) for w in frame['iso_week']]
        unknown = sorted(set(frame['theme']) - set(THEMES))
        if unknown:
            raise ValidationError("unknown media themes {}; expected {}".format(unknown, THEMES), path=path)
        attention = pd.to_numeric(frame['attention'], errors='coerce').to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~(np.isfinite(attention) & (attention >= 0) & (attention <= 1)))
        if bad.size:
            raise ValidationError("attention must lie in [0, 1]", path=path, line=int(bad[0]) + 2)
        frame['attention'] = attention
        if frame.duplicated(['area', 'week', 'theme']).any():
            row = int(np.flatnonzero(frame.duplicated(['area', 'week', 'theme']).to_numpy())[0])
            raise ValidationError("duplicate (area, week, theme) entry", path=path, line=row + 2)

        table = frame.pivot_table(index=['area', 'week'], columns='theme', values='attention')
        table = table.reindex(columns=list(THEMES))
        if table.isna().any().any():
            area, week = table.index[np.flatnonzero(table.isna().any(axis=1).to_numpy())[0]]
            raise ValidationError("area {} week {} lacks a value for every theme".format(area, iso_week_label(week)),
                                  path=path)
        for area, block in table.groupby(level='area'):
            weeks = np.asarray(sorted(block.index.get_level_values('week')), dtype='datetime64[D]')
            if np.any(np.diff(weeks) != np.timedelta64(7, 'D')):
                raise ValidationError("weeks of area {} are not contiguous".format(area), path=path)
        self.table = table
        self.path = path

    @classmethod
    def from_csv(cls, path):
        return cls(_read_csv(path), path=path)

    @property
    def areas(self):
        return tuple(sorted(self.table.index.get_level_values('area').unique()))

    def weekly(self, area=None) -> pd.DataFrame:
        """Week x theme attention for an area; the per-week cross-area median when area is None."""
        if area is None:
            return self.table.groupby(level='week').median()
        if area not in self.areas:
            raise ValidationError("area {!r} is not in the media series".format(area), path=self.path)
        return self.table.xs(area, level='area')

    def to_frame(self):
        frame = self.table.stack().rename('attention').reset_index()
        frame['iso_week'] = [iso_week_label(w) for w in frame['week']]
        return frame.loc[:, list(MEDIA_COLUMNS)]


def _window_mean(weekly, interval):
    start, end = interval
    first = start + datetime.timedelta(days=(7 - start.weekday()) % 7)
    mondays = []
    while first < end:
        mondays.append(first)
        first += WEEK
    if not mondays:
        raise ValidationError("window {} .. {} contains no week".format(start, end))
    missing = [m for m in mondays if m not in weekly.index]
    if missing:
        raise ValidationError("media series does not cover window {} .. {} (first missing week {})".format(
            start, end, iso_week_label(missing[0])))
    return weekly.loc[mondays, list(THEMES)].to_numpy(dtype=np.float64).mean(axis=0)

def media_features(series: MediaSeries, area, windows: TemporalWindows):
    """Raw (un-standardized) M_L and M_S: per-theme mean weekly attention over each window.

    A week belongs to a window when its Monday lies in [start, end).
    """
    weekly = series.weekly(area)
    return _window_mean(weekly, windows.long_term), _window_mean(weekly, windows.short_term)


class LoadedDataset(NamedTuple):
    catalog: SubredditCatalog
    observations: List[UserObservation]
    media: Optional[MediaSeries]
    diagnostics: List[str]


def _read_csv(path):
    if not os.path.exists(path):
        raise ValidationError("file not found", path=path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ValidationError("cannot parse CSV: {}".format(e), path=path)
    frame.columns = [c.strip() for c in frame.columns]
    return frame

def _require(frame, columns, path):
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValidationError("missing columns {}".format(missing), path=path)

def _float(value, column, path, line, user_id=None):
    try:
        x = float(value)
    except ValueError:
        raise ValidationError("{} is not a number: {!r}".format(column, value), path=path, line=line, user_id=user_id)
    if not np.isfinite(x):
        raise ValidationError("{} must be finite".format(column), path=path, line=line, user_id=user_id)
    return x

def _bit(value, column, path, line, user_id=None):
    if str(value).strip() not in ('0', '1'):
        raise ValidationError("{} must be 0 or 1, got {!r}".format(column, value), path=path, line=line,
                              user_id=user_id)
    return int(value)

def _bits(value, column, K, path, line, user_id):
    value = str(value).strip()
    if set(value) - {'0', '1'}:
        raise ValidationError("{} must be a bitstring".format(column), path=path, line=line, user_id=user_id)
    if len(value) != K:
        raise ValidationError("{} has length {}, catalog has K={}".format(column, len(value), K),
                              path=path, line=line, user_id=user_id)
    return np.frombuffer(value.encode('ascii'), dtype=np.uint8).astype(np.int8) - ord('0')


def read_catalog(path) -> SubredditCatalog:
    frame = _read_csv(path)
    _require(frame, CATALOG_COLUMNS, path)
    if len(frame) == 0:
        raise ValidationError("catalog must contain at least one subreddit", path=path)
    names = frame['name'].str.strip()
    dup = names.duplicated()
    if dup.any():
        row = int(np.flatnonzero(dup.to_numpy())[0])
        raise ValidationError("duplicate subreddit {!r}".format(names.iloc[row]), path=path, line=row + 2)
    D_sub = np.empty((len(frame), len(AXES)))
    N_sub = np.empty(len(frame))
    for row, record in enumerate(frame.itertuples(index=False)):
        record = record._asdict()
        for j, axis in enumerate(AXES):
            D_sub[row, j] = _float(record[axis], axis, path, row + 2)
        N_sub[row] = _float(record['popularity_z'], 'popularity_z', path, row + 2)
    return SubredditCatalog(names=tuple(names), D_sub=D_sub, N_sub=N_sub)

def read_location_map(path):
    frame = _read_csv(path)
    _require(frame, ('subreddit', 'area'), path)
    location_map = {}
    for row, (sub, area) in enumerate(zip(frame['subreddit'].str.strip(), frame['area'].str.strip())):
        if sub in location_map and location_map[sub] != area:
            raise ValidationError("subreddit {} maps to both {} and {}".format(sub, location_map[sub], area),
                                  path=path, line=row + 2)
        location_map[sub] = area
    return location_map

def read_interactions(path):
    frame = _read_csv(path)
    _require(frame, ('user_id', 'I'), path)
    interactions = {}
    for row, (uid, value) in enumerate(zip(frame['user_id'].str.strip(), frame['I'])):
        if uid in interactions:
            raise ValidationError("duplicate user id", path=path, line=row + 2, user_id=uid)
        interactions[uid] = _bit(value, 'I', path, row + 2, uid)
    return interactions


def _standardize_media(raw, diagnostics):
    raw = np.asarray(raw, dtype=np.float64)
    out = np.zeros_like(raw)
    for j, column in enumerate(MEDIA_OVERRIDES):
        values = raw[:, j]
        if values.size >= 2 and values.std(ddof=1) > 0:
            out[:, j] = zscore(values)
        else:
            diagnostics.append("{} has no variance across users; set to 0".format(column))
    return out


def load_dataset(catalog_path, users_path, media_path=None, interactions_path=None, location_map_path=None,
                 gap_enabled=True, verbose=0) -> LoadedDataset:
    """Load and cross-validate the input tables.

    Users with all six M_* columns filled keep them as given. The media features of the
    remaining users are derived from the media series over their windows and then
    z-scored over those users.
    """
    catalog = read_catalog(catalog_path)
    media = MediaSeries.from_csv(media_path) if media_path is not None else None
    interactions = read_interactions(interactions_path) if interactions_path is not None else None
    location_map = read_location_map(location_map_path) if location_map_path is not None else None
    diagnostics = []

    path = users_path
    frame = _read_csv(path)
    _require(frame, USER_COLUMNS, path)
    if interactions is None:
        _require(frame, ('I',), path)
    overrides = [c for c in MEDIA_OVERRIDES if c in frame.columns]
    if overrides and len(overrides) != len(MEDIA_OVERRIDES):
        raise ValidationError("media override columns must be all of {} or none".format(MEDIA_OVERRIDES), path=path)
    if len(frame) == 0:
        raise ValidationError("users file has no rows", path=path)

    seen = set()
    rows, raw_media, derived = [], [], []
    for row, record in enumerate(frame.to_dict('records')):
        line = row + 2
        uid = str(record['user_id']).strip()
        if not uid:
            raise ValidationError("empty user id", path=path, line=line)
        if uid in seen:
            raise ValidationError("duplicate user id", path=path, line=line, user_id=uid)
        seen.add(uid)

        if interactions is not None and uid in interactions:
            I = interactions[uid]
        elif 'I' in record and str(record['I']).strip() != '':
            I = _bit(record['I'], 'I', path, line, uid)
        else:
            raise ValidationError("no interaction bit", path=path, line=line, user_id=uid)

        location = str(record.get('location', '')).strip() or None
        if location is None and location_map is not None and str(record.get('location_subreddits', '')).strip():
            subs = [s.strip() for s in str(record['location_subreddits']).split(';') if s.strip()]
            location = georeference(subs, location_map)

        fields = dict(
            P_L=_bits(record['P_L'], 'P_L', catalog.K, path, line, uid),
            P_S=_bits(record['P_S'], 'P_S', catalog.K, path, line, uid),
            E_L=_float(record['E_L'], 'E_L', path, line, uid),
            E_S=_float(record['E_S'], 'E_S', path, line, uid),
            I=I, A=_bit(record['A'], 'A', path, line, uid), location=location, user_id=uid)

        given = [str(record[c]).strip() for c in overrides]
        if given and all(given):
            m = [_float(v, c, path, line, uid) for v, c in zip(given, overrides)]
            fields['M_L'], fields['M_S'] = np.asarray(m[:len(THEMES)]), np.asarray(m[len(THEMES):])
        elif any(given):
            raise ValidationError("partially filled media override columns", path=path, line=line, user_id=uid)
        else:
            if media is None or not str(record.get('t_A', '')).strip():
                raise ValidationError("media features need either M_* columns or a media series and t_A",
                                      path=path, line=line, user_id=uid)
            area = location
            if area is not None and area not in media.areas:
                diagnostics.append("user {}: area {!r} not in media series, using cross-area median".format(
                    uid, area))
                area = None
            windows = split_windows(record['t_A'], gap_enabled)
            try:
                M_L, M_S = media_features(media, area, windows)
            except ValidationError as e:
                raise ValidationError(str(e), path=path, line=line, user_id=uid)
            raw_media.append(np.concatenate([M_L, M_S]))
            derived.append(row)
            fields['M_L'] = fields['M_S'] = None
        rows.append(fields)

    if interactions is not None:
        for uid in sorted(set(interactions) - seen):
            diagnostics.append("interactions: unknown user {}".format(uid))

    if derived:
        standardized = _standardize_media(raw_media, diagnostics)
        for row, m in zip(derived, standardized):
            rows[row]['M_L'], rows[row]['M_S'] = m[:len(THEMES)], m[len(THEMES):]

    observations = [UserObservation(**fields).validate(catalog) for fields in rows]
    if verbose:
        print("----------------------data-----------------------")
        print("subreddits : ", catalog.K)
        print("users : ", len(observations))
        print("media-derived users : ", len(derived))
        print("warnings : ", len(diagnostics))
        print("-------------------------------------------------")
    return LoadedDataset(catalog=catalog, observations=observations, media=media, diagnostics=diagnostics)


def save_dataset(out_dir, catalog: SubredditCatalog, observations, media: Optional[MediaSeries] = None):
    """Write catalog.csv and users.csv (and media.csv) so that load_dataset reads them back exactly.

    Media features are written as M_* overrides; floats use 17 significant digits.
    """
    os.makedirs(out_dir, exist_ok=True)
    catalog_frame = pd.DataFrame({'name': list(catalog.names)})
    for j, axis in enumerate(AXES):
        catalog_frame[axis] = catalog.D_sub[:, j]
    catalog_frame['popularity_z'] = catalog.N_sub
    catalog_frame.to_csv(os.path.join(out_dir, 'catalog.csv'), index=False, float_format='%.17g')

    records = []
    for i, obs in enumerate(observations):
        record = {'user_id': obs.user_id if obs.user_id is not None else 'u{:06d}'.format(i),
                  'A': int(obs.A), 'I': int(obs.I), 'E_L': float(obs.E_L), 'E_S': float(obs.E_S),
                  'location': obs.location or '',
                  'P_L': ''.join(str(int(b)) for b in obs.P_L),
                  'P_S': ''.join(str(int(b)) for b in obs.P_S)}
        for column, value in zip(MEDIA_OVERRIDES, np.concatenate([obs.M_L, obs.M_S])):
            record[column] = float(value)
        records.append(record)
    columns = list(USER_COLUMNS[:2]) + ['I'] + list(USER_COLUMNS[2:]) + ['location'] + list(MEDIA_OVERRIDES)
    users_frame = pd.DataFrame(records, columns=columns)
    users_frame.to_csv(os.path.join(out_dir, 'users.csv'), index=False, float_format='%.17g')

    written = ['catalog.csv', 'users.csv']
    if media is not None:
        media.to_frame().to_csv(os.path.join(out_dir, 'media.csv'), index=False, float_format='%.17g')
        written.append('media.csv')
    return [os.path.join(out_dir, name) for name in written]
