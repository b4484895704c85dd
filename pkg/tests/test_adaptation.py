"""Mixture adaptation: weight formulas, fusion, and the full pipeline."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixadapt import adaptation, oracle, simulate
from mixadapt.adaptation import (
    SourceBundle,
    adapt_map,
    adapt_pixel,
    conditional_weights_exact,
    conditional_weights_from_discriminator,
    fuse_posteriors,
    likelihood_mixture_weights,
    mixture_priors,
    plausible_sources,
)
from mixadapt.errors import (
    AllZeroError,
    DimensionMismatchError,
    EmptySetError,
    ZeroPriorError,
)


def two_source_bundle():
    return SourceBundle(
        train_priors=[[0.5, 0.5], [0.5, 0.5]],
        true_priors=[[0.8, 0.2], [0.4, 0.6]],
    )


class TestSourceBundle:
    def test_zero_train_prior_rejected(self):
        with pytest.raises(ZeroPriorError):
            SourceBundle(train_priors=[[1.0, 0.0]], true_priors=[[0.5, 0.5]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            SourceBundle(train_priors=[[0.5, 0.5]], true_priors=[[0.2, 0.3, 0.5]])

    def test_counts(self):
        bundle = two_source_bundle()
        assert bundle.source_count == 2
        assert bundle.class_count == 2


class TestMixturePriors:
    def test_one_hot_returns_that_source(self):
        bundle = two_source_bundle()
        np.testing.assert_allclose(mixture_priors(bundle, [1.0, 0.0]), [0.8, 0.2])

    def test_symmetric_mixture(self):
        bundle = SourceBundle(
            train_priors=[[0.5, 0.5], [0.5, 0.5]],
            true_priors=[[1.0, 0.0], [0.0, 1.0]],
        )
        # degenerate true priors allowed; only train priors must be positive
        np.testing.assert_allclose(mixture_priors(bundle, [0.5, 0.5]), [0.5, 0.5])

    def test_worked_example(self):
        bundle = two_source_bundle()
        np.testing.assert_allclose(mixture_priors(bundle, [0.25, 0.75]), [0.5, 0.5])


class TestLikelihoodMixtureWeights:
    def test_one_hot_weights(self):
        bundle = two_source_bundle()
        w = likelihood_mixture_weights(bundle, [1.0, 0.0])
        np.testing.assert_allclose(w[0], [1.0, 1.0])
        np.testing.assert_allclose(w[1], [0.0, 0.0])

    def test_identical_priors_give_lambda(self):
        bundle = SourceBundle(
            train_priors=[[0.5, 0.5], [0.5, 0.5]],
            true_priors=[[0.3, 0.7], [0.3, 0.7]],
        )
        w = likelihood_mixture_weights(bundle, [0.25, 0.75])
        np.testing.assert_allclose(w, [[0.25, 0.25], [0.75, 0.75]], atol=1e-15)

    def test_worked_example(self):
        bundle = two_source_bundle()
        w = likelihood_mixture_weights(bundle, [0.5, 0.5])
        np.testing.assert_allclose(w[:, 0], [2 / 3, 1 / 3], atol=1e-15)
        np.testing.assert_allclose(w[:, 1], [1 / 4, 3 / 4], atol=1e-15)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_columns_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        n, k = int(rng.integers(1, 5)), int(rng.integers(2, 6))
        true = rng.dirichlet(np.ones(k), size=n) + 1e-9
        true /= true.sum(axis=1, keepdims=True)
        bundle = SourceBundle.with_uniform_train_priors(true)
        lam = rng.dirichlet(np.ones(n))
        w = likelihood_mixture_weights(bundle, lam)
        np.testing.assert_allclose(w.sum(axis=0), 1.0, atol=1e-12)

    def test_zero_mixture_prior_class_raises(self):
        bundle = SourceBundle(
            train_priors=[[0.5, 0.5], [0.5, 0.5]],
            true_priors=[[1.0, 0.0], [1.0, 0.0]],
        )
        with pytest.raises(ZeroPriorError):
            likelihood_mixture_weights(bundle, [0.5, 0.5])


class TestConditionalWeightsExact:
    def test_uninformative_evidence_gives_lambda(self):
        lam = [0.3, 0.7]
        np.testing.assert_allclose(conditional_weights_exact(lam, [0.4, 0.4]), lam, atol=1e-15)

    def test_single_support_source(self):
        np.testing.assert_allclose(
            conditional_weights_exact([0.5, 0.5], [0.0, 0.7]), [0.0, 1.0]
        )

    def test_worked_example(self):
        out = conditional_weights_exact([0.75, 0.25], [0.2, 0.6])
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-15)

    def test_impossible_evidence_raises(self):
        with pytest.raises(AllZeroError):
            conditional_weights_exact([1.0, 0.0], [0.0, 0.5])

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            lam = rng.dirichlet(np.ones(4))
            dens = rng.uniform(0.01, 5.0, size=4)
            scale = rng.uniform(0.01, 100.0)
            np.testing.assert_allclose(
                conditional_weights_exact(lam, dens),
                conditional_weights_exact(lam, dens * scale),
                atol=1e-13,
            )


class TestConditionalWeightsFromDiscriminator:
    def test_lambda_equals_kappa_is_identity(self):
        disc = [0.4, 0.6]
        out = conditional_weights_from_discriminator([0.5, 0.5], [0.5, 0.5], disc)
        np.testing.assert_allclose(out, disc, atol=1e-15)

    def test_one_hot_lambda(self):
        out = conditional_weights_from_discriminator([1.0, 0.0], [0.5, 0.5], [0.3, 0.7])
        np.testing.assert_allclose(out, [1.0, 0.0])

    def test_worked_example(self):
        out = conditional_weights_from_discriminator([0.75, 0.25], [0.5, 0.5], [0.4, 0.6])
        np.testing.assert_allclose(out, [2 / 3, 1 / 3], atol=1e-15)

    def test_all_mass_on_inactive_sources_raises(self):
        # The target mixture claims source 1 impossible, but the
        # discriminator puts every bit of mass there.
        with pytest.raises(AllZeroError):
            conditional_weights_from_discriminator([1.0, 0.0], [0.5, 0.5], [0.0, 1.0])

    def test_agrees_with_exact_formula_via_discriminator_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            n = int(rng.integers(2, 5))
            domains = [
                oracle.generate_domain(3, 12, 1.0, int(rng.integers(2**31)))
                for _ in range(n)
            ]
            kappa = rng.dirichlet(np.ones(n)) + 1e-3
            kappa /= kappa.sum()
            lam = rng.dirichlet(np.ones(n))
            e = int(rng.integers(12))
            dens = np.array([d.evidence_marginal()[e] for d in domains])
            disc = oracle.exact_discriminator(domains, kappa, e)
            np.testing.assert_allclose(
                conditional_weights_from_discriminator(lam, kappa, disc),
                conditional_weights_exact(lam, dens),
                atol=1e-12,
            )


class TestFusePosteriors:
    def test_single_source_identity(self):
        p = np.array([[0.2, 0.8]])
        np.testing.assert_array_equal(fuse_posteriors([1.0], p), p[0])

    def test_symmetry(self):
        out = fuse_posteriors([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(out, [0.5, 0.5])

    def test_worked_example(self):
        out = fuse_posteriors([2 / 3, 1 / 3], [[0.9, 0.1], [0.3, 0.7]])
        np.testing.assert_allclose(out, [0.7, 0.3], atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            fuse_posteriors([0.5, 0.5], [[0.5, 0.5]])

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_output_in_convex_hull(self, seed):
        rng = np.random.default_rng(seed)
        n, k = int(rng.integers(1, 6)), int(rng.integers(2, 6))
        posts = rng.dirichlet(np.ones(k), size=n)
        omega = rng.dirichlet(np.ones(n))
        fused = fuse_posteriors(omega, posts)
        assert np.all(fused >= posts.min(axis=0) - 1e-12)
        assert np.all(fused <= posts.max(axis=0) + 1e-12)
        assert fused.sum() == pytest.approx(1.0, abs=1e-12)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_unanimous_map_decision_survives_fusion(self, seed):
        rng = np.random.default_rng(seed)
        n, k = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        winner = int(rng.integers(k))
        posts = rng.dirichlet(np.ones(k), size=n)
        # force a strict common argmax
        posts[:, winner] += posts.max(axis=1) + 0.1
        posts /= posts.sum(axis=1, keepdims=True)
        omega = rng.dirichlet(np.ones(n))
        fused = fuse_posteriors(omega, posts)
        assert int(np.argmax(fused)) == winner

    def test_fusion_error_bounded_by_input_errors(self):
        # L1 error of the fused output is at most the posterior error
        # budget plus the weight error budget.
        rng = np.random.default_rng(31)
        for _ in range(200):
            n, k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            posts = rng.dirichlet(np.ones(k), size=n)
            omega = rng.dirichlet(np.ones(n))
            noisy_posts = rng.dirichlet(np.ones(k), size=n)
            noisy_omega = rng.dirichlet(np.ones(n))
            eps_s = np.abs(noisy_posts - posts).sum(axis=1).max()
            eps_w = np.abs(noisy_omega - omega).sum()
            err = np.abs(
                fuse_posteriors(noisy_omega, noisy_posts) - fuse_posteriors(omega, posts)
            ).sum()
            assert err <= eps_s + eps_w + 1e-9


class TestPlausibleSources:
    def test_one_hot(self):
        assert plausible_sources([1.0, 0.0], 0.0) == {0}

    def test_split(self):
        assert plausible_sources([0.5, 0.5], 0.4) == {0, 1}

    def test_worked_example(self):
        assert plausible_sources([0.7, 0.2, 0.1], 0.15) == {0, 1}

    def test_threshold_too_high_raises(self):
        with pytest.raises(EmptySetError):
            plausible_sources([0.6, 0.4], 0.6)


class TestAdaptPixel:
    def test_single_source_identity(self):
        bundle = SourceBundle(train_priors=[[0.3, 0.7]], true_priors=[[0.3, 0.7]])
        star = [[0.25, 0.75]]
        out = adapt_pixel(star, bundle, [1.0], [1.0])
        np.testing.assert_allclose(out, star[0], atol=1e-15)

    def test_one_hot_lambda_matches_single_source_route(self):
        from mixadapt.heuristics import heuristic_source_model

        inst = simulate.make_instance(3, 4, 10, 1.0, seed=5)
        lam = np.array([0.0, 1.0, 0.0])
        target = mixture_priors(inst.bundle, lam)
        for e in range(10):
            star = inst.star_tables[:, e, :]
            ours = adapt_pixel(star, inst.bundle, inst.disc_table[e], lam, inst.kappa)
            heur = heuristic_source_model(1, star[1], inst.bundle, target)
            np.testing.assert_allclose(ours, heur, atol=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(1234)
        for trial in range(20):
            n = int(rng.integers(1, 5))
            k = int(rng.integers(2, 6))
            m = int(rng.integers(2, 30))
            inst = simulate.make_instance(n, k, m, 1.0, seed=1000 + trial)
            lam = rng.dirichlet(np.ones(n))
            for e in range(m):
                expected = oracle.brute_force_target_posterior(inst.domains, lam, e)
                got = adapt_pixel(
                    inst.star_tables[:, e, :], inst.bundle, inst.disc_table[e],
                    lam, inst.kappa,
                )
                assert np.abs(got - expected).sum() <= 1e-10

    def test_stage_annotated_errors(self):
        bundle = SourceBundle(
            train_priors=[[0.5, 0.5], [0.5, 0.5]],
            true_priors=[[0.0, 1.0], [0.5, 0.5]],
        )
        # source 0's shift sends all mass of a (1, 0) posterior to zero
        with pytest.raises(AllZeroError, match=r"source shift \(source 0\)"):
            adapt_pixel([[1.0, 0.0], [0.5, 0.5]], bundle, [0.5, 0.5], [0.5, 0.5])
        bundle2 = two_source_bundle()
        with pytest.raises(AllZeroError, match="conditional weights"):
            adapt_pixel([[0.5, 0.5], [0.5, 0.5]], bundle2, [0.0, 1.0], [1.0, 0.0])


class TestAdaptMap:
    def test_singleton_equals_adapt_pixel(self):
        inst = simulate.make_instance(3, 4, 12, 1.0, seed=2)
        lam = np.array([0.2, 0.3, 0.5])
        for e in (0, 5, 11):
            star = inst.star_tables[:, e, :]
            disc = inst.disc_table[e]
            px = adapt_pixel(star, inst.bundle, disc, lam, inst.kappa)
            mp = adapt_map(star[:, None, None, :], inst.bundle, disc[None, None, :],
                           lam, inst.kappa)
            np.testing.assert_allclose(mp[0, 0], px, atol=1e-13, rtol=0)

    def test_constant_map(self):
        inst = simulate.make_instance(2, 3, 8, 1.0, seed=3)
        lam = np.array([0.4, 0.6])
        e = 4
        star = np.broadcast_to(
            inst.star_tables[:, e, None, None, :], (2, 6, 7, 3)
        ).copy()
        disc = np.broadcast_to(inst.disc_table[e], (6, 7, 2)).copy()
        out = adapt_map(star, inst.bundle, disc, lam, inst.kappa)
        expected = adapt_pixel(inst.star_tables[:, e, :], inst.bundle,
                               inst.disc_table[e], lam, inst.kappa)
        np.testing.assert_allclose(out, np.broadcast_to(expected, out.shape), atol=1e-13)

    def test_mosaic_frame_matches_oracle(self):
        rng = np.random.default_rng(77)
        domains = [oracle.generate_domain(4, 16, 1.0, 100 + i) for i in range(4)]
        inst = simulate.ExactInstance(domains)
        frames = [
            (*oracle.sample_domain_frame(domains[i], 24, 32, seed=200 + i), i)
            for i in range(4)
        ]
        mosaic = oracle.mosaic_compose(frames, seed=9)
        star = inst.star_tables[:, mosaic.evidence, :]
        disc = inst.disc_table[mosaic.evidence, :]
        lam = rng.dirichlet(np.ones(4))
        fused = adapt_map(star, inst.bundle, disc, lam, inst.kappa)
        oracle_table = inst.oracle_table(lam)
        expected = oracle_table[mosaic.evidence]
        assert np.abs(fused - expected).sum(axis=-1).max() <= 1e-10

    @pytest.mark.parametrize("threads", [2, 3, 5, 8])
    def test_thread_count_does_not_change_bits(self, threads):
        inst = simulate.make_instance(4, 4, 32, 1.0, seed=4)
        evidence = np.random.default_rng(0).integers(0, 32, size=(30, 41))
        star = inst.star_tables[:, evidence, :]
        disc = inst.disc_table[evidence, :]
        lam = np.array([0.1, 0.2, 0.3, 0.4])
        single = adapt_map(star, inst.bundle, disc, lam, inst.kappa, threads=1)
        multi = adapt_map(star, inst.bundle, disc, lam, inst.kappa, threads=threads)
        assert np.array_equal(single, multi)

    def test_dimension_errors(self):
        inst = simulate.make_instance(2, 3, 8, 1.0, seed=6)
        star = inst.star_tables[:, :4, None, :]
        bad_disc = inst.disc_table[:3, None, :]
        with pytest.raises(DimensionMismatchError):
            adapt_map(star, inst.bundle, bad_disc, [0.5, 0.5], inst.kappa)

    def test_failure_reports_pixel_coordinates(self):
        bundle = SourceBundle(
            train_priors=[[0.5, 0.5], [0.5, 0.5]],
            true_priors=[[0.0, 1.0], [0.5, 0.5]],
        )
        star = np.full((2, 2, 3, 2), 0.5)
        star[0, 1, 2] = [1.0, 0.0]  # shifted mass vanishes at pixel (1, 2)
        disc = np.full((2, 3, 2), 0.5)
        with pytest.raises(AllZeroError, match=r"\(1, 2\)"):
            adapt_map(star, bundle, disc, [0.5, 0.5])


class TestPosteriorMapContainer:
    def test_valid_grid(self):
        from mixadapt.adaptation import PosteriorMap

        grid = np.full((3, 4, 2), 0.5)
        pm = PosteriorMap(grid)
        assert (pm.height, pm.width, pm.channels) == (3, 4, 2)

    def test_rejects_bad_rank(self):
        from mixadapt.adaptation import PosteriorMap

        with pytest.raises(DimensionMismatchError):
            PosteriorMap(np.zeros((3, 4)))
