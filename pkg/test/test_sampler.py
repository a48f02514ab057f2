from absl.testing import absltest, parameterized
import jax.numpy as jnp
import numpy as np

from climact.common.exceptions import ValidationError
from climact.common.utils import sigmoid
from climact.model import network
from climact.model.sampler import (MediaGenerator, default_parameters, forward_sample, sample_dataset,
                                   synthetic_catalog)
from climact.model.types import (FULL_MODEL, Hyperparameters, ModelStructure, SubredditCatalog, UserObservation,
                                 zeros_parameters)


def three_binomial_se(p, n):
    return 3.0 * np.sqrt(p * (1.0 - p) / n)


class TestForwardSample(parameterized.TestCase):
    def setUp(self):
        super(TestForwardSample, self).setUp()
        self.catalog = synthetic_catalog(5, seed=0)

    def test_deterministic(self):
        params = default_parameters()
        a, la = sample_dataset(params, self.catalog, n_users=300, seed=7)
        b, lb = sample_dataset(params, self.catalog, n_users=300, seed=7)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
        np.testing.assert_array_equal(la.S, lb.S)
        c, _ = sample_dataset(params, self.catalog, n_users=300, seed=8)
        self.assertFalse(np.array_equal(a.E_L, c.E_L))

    def test_observations(self):
        observations, latents = forward_sample(default_parameters(), self.catalog, n_users=20, seed=1)
        self.assertLen(observations, 20)
        self.assertIsInstance(observations[0], UserObservation)
        for obs in observations:
            obs.validate(self.catalog)
        self.assertEqual(latents.D.shape, (20, 4))
        self.assertEqual(latents.S.shape, (20,))

    def test_degenerate_engagement_noise(self):
        params = default_parameters()._replace(theta_E=jnp.asarray(1e-12), beta_E1=jnp.asarray(1.0),
                                               beta_E0=jnp.asarray(0.0))
        data, _ = sample_dataset(params, self.catalog, n_users=500, seed=3)
        np.testing.assert_allclose(data.E_S, data.E_L, atol=1e-5)

    def test_null_activation_rate(self):
        n = 10000
        data, _ = sample_dataset(zeros_parameters(), self.catalog, n_users=n, seed=4)
        self.assertLess(abs(data.A.mean() - 0.5), three_binomial_se(0.5, n))

    def test_calibration(self):
        n = 50000
        catalog = SubredditCatalog(names=('r/a', 'r/b', 'r/c'),
                                   D_sub=np.array([[1.0, -0.5, 0.0, 0.3], [0.0, 0.5, -1.0, 0.0], [-1.0, 0.0, 1.0, -0.3]]),
                                   N_sub=np.array([-0.5, 0.0, 1.0]))
        params = default_parameters()
        data, latents = sample_dataset(params, catalog, n_users=n, seed=5)

        p_L = np.asarray(network.participation_long_prob(latents.D, catalog, data.E_L, params))
        for k in range(catalog.K):
            p = p_L[:, k].mean()
            self.assertLess(abs(data.P_L[:, k].mean() - p), three_binomial_se(p, n))

        p_I = np.asarray(network.interaction_prob(data.P_S, catalog, data.E_S, params))
        self.assertLess(abs(data.I.mean() - p_I.mean()), three_binomial_se(p_I.mean(), n))

        p_A = np.asarray(network.activation_prob(latents.S, data.I, data.M_S, data.M_L, data.E_S, params))
        self.assertLess(abs(data.A.mean() - p_A.mean()), three_binomial_se(p_A.mean(), n))

    def test_sympathy_variance(self):
        hyper = Hyperparameters(var_S=4.0)
        params = default_parameters()
        data, latents = sample_dataset(params, self.catalog, hyper, n_users=20000, seed=6)
        residual = latents.S - np.asarray(network.sympathy_mean(latents.D, data.E_L, data.M_L, params))
        self.assertAlmostEqual(residual.var(), 4.0, delta=0.2)

    @parameterized.parameters('E', 'I', 'M', 'D')
    def test_ablated_parameters(self, group):
        structure = ModelStructure.without(group)
        data, latents = sample_dataset(default_parameters(structure), self.catalog, n_users=50, seed=0)
        self.assertEqual(data.A.shape, (50,))
        if group == 'I':
            np.testing.assert_array_equal(data.I, 0.0)

    @parameterized.parameters('constant', 'zeros')
    def test_media_generators(self, kind):
        data, _ = sample_dataset(default_parameters(), self.catalog, n_users=30,
                                 media_generator=MediaGenerator(kind), seed=0)
        np.testing.assert_array_equal(data.M_S, data.M_L)
        if kind == 'zeros':
            np.testing.assert_array_equal(data.M_L, 0.0)

    def test_invalid_media_generator(self):
        with self.assertRaises(ValidationError):
            sample_dataset(default_parameters(), self.catalog, media_generator=MediaGenerator('uniform'))
        with self.assertRaises(ValidationError):
            sample_dataset(default_parameters(), self.catalog, media_generator=MediaGenerator('normal', 0.0, -1.0))

    def test_rejects_empty_population(self):
        with self.assertRaises(ValidationError):
            sample_dataset(default_parameters(), self.catalog, n_users=0)


class TestSyntheticCatalog(parameterized.TestCase):
    def test_standardized(self):
        catalog = synthetic_catalog(40, seed=2)
        self.assertEqual(catalog.K, 40)
        np.testing.assert_allclose(catalog.D_sub.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(catalog.D_sub.std(axis=0, ddof=1), 1.0, rtol=1e-12)
        self.assertLen(set(catalog.names), 40)

    def test_default_parameters_cover_structure(self):
        self.assertEqual(set(default_parameters().present()), set(FULL_MODEL.parameter_shapes()))
        self.assertEqual(float(default_parameters().beta_A2), 1.0)
        self.assertEqual(float(default_parameters().theta_E), 0.25)

    def test_catalog_validation(self):
        with self.assertRaises(ValidationError):
            SubredditCatalog(names=(), D_sub=np.zeros((0, 4)), N_sub=np.zeros(0))
        with self.assertRaises(ValidationError):
            SubredditCatalog(names=('r/a', 'r/a'), D_sub=np.zeros((2, 4)), N_sub=np.zeros(2))
        with self.assertRaises(ValidationError):
            SubredditCatalog(names=('r/a',), D_sub=np.zeros((1, 3)), N_sub=np.zeros(1))
        with self.assertRaises(ValidationError):
            SubredditCatalog(names=('r/a',), D_sub=np.full((1, 4), np.inf), N_sub=np.zeros(1))

    def test_sigmoid_probability_range(self):
        self.assertTrue(0.0 < float(sigmoid(-30.0)) < float(sigmoid(30.0)) < 1.0)


if __name__ == '__main__':
    absltest.main()
