import itertools
import json
import math
import os
import tempfile
from io import StringIO
from os.path import join
from unittest import mock
import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, override_settings
from jgreedy.bounds import (
    DAI_RHO,
    SAME_RHO,
    bounds_row,
    bounds_sweep,
    convergence_thresholds,
    crossover_delta,
    dai_iteration_bound,
    excess_iterations,
    format_bounds_csv,
    gamma,
    greedy_partition,
    iteration_constant_cosamp,
    iteration_constant_sp,
    kmin_noiseless,
    lemma2_merge_condition,
    lemma2_rho_condition,
    noise_tau,
    rho_cosamp,
    rho_sp,
    tau1,
)
from jgreedy.errors import CapacityError, DomainError, RecoveryError, SingularSupportError
from jgreedy.experiments import (
    EXPERIMENT_CSV_HEADER,
    PERTURBED_IDENTITY,
    DecayReport,
    TrialConfig,
    check_decay,
    check_iteration_bound,
    decay_validation,
    format_experiment_csv,
    gaussian_sensing_matrix,
    instance_for_trial,
    iteration_bound_experiment,
    perturbed_identity_matrix,
    random_sparse_signal,
    run_single_trial,
    run_trials,
    store_trial_records,
    summarize_trials,
)
from jgreedy.helpers import derive_seed, format_float, json_dumps
from jgreedy.management.commands.bounds import Command as BoundsCommand
from jgreedy.models import ExperimentRun, TrialResult
from jgreedy.parsers import format_matrix_csv, parse_matrix_csv, parse_vector, read_matrix_file
from jgreedy.pursuit import (
    COSAMP,
    SP,
    TRACE_CSV_HEADER,
    RecoveryConfig,
    cosamp_step,
    exact_recovery,
    exhaustive_oracle_recovery,
    format_trace_csv,
    missed_energy,
    run,
    sp_step,
)
from jgreedy.rip import exact_ric, monte_carlo_ric_lower_bound, rip_sandwich_violations
from jgreedy.sparse import SparseSignal, hard_threshold, least_squares_on_support, magnitude_order, residual, restrict, support_set

DELTA = 1.0 / math.sqrt(5.0)


def data_file(name: str) -> str:
    return join(settings.BASE_DIR, "data/jgreedy", name)


class SparseTests(TestCase):
    def test_hard_threshold(self):
        x = hard_threshold([3.0, -4.0, 1.0, 0.0], 2)
        self.assertEqual(x.support, (0, 1))
        self.assertTrue(np.array_equal(x.values, [3.0, -4.0, 0.0, 0.0]))
        self.assertEqual(hard_threshold([1.0, -1.0, 1.0], 1).support, (0,))
        v = np.array([0.5, -2.0, 0.0, 7.0])
        self.assertTrue(np.array_equal(hard_threshold(v, 4).values, v))
        with self.assertRaises(ValidationError):
            hard_threshold(v, 5)

    def test_hard_threshold_optimal(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            v = rng.standard_normal(8)
            for k in range(9):
                best = float(np.linalg.norm(v - hard_threshold(v, k).values))
                for subset in itertools.combinations(range(8), k):
                    self.assertLessEqual(best, float(np.linalg.norm(v - restrict(v, subset))) + 1e-12)

    def test_magnitude_order(self):
        order = magnitude_order([1.0, -3.0, 2.0, -2.0])
        self.assertEqual(order.permutation, (1, 2, 3, 0))
        self.assertTrue(np.array_equal(order.sorted_magnitudes, [3.0, 2.0, 2.0, 1.0]))
        order = magnitude_order([0.0, 5.0, 0.0, -2.0])
        self.assertEqual(order.permutation, (1, 3, 0, 2))
        self.assertTrue(np.array_equal(order.sorted_magnitudes, [5.0, 2.0, 0.0, 0.0]))
        self.assertEqual(magnitude_order([1.0, 1.0]).permutation, (0, 1))
        order = magnitude_order([])
        self.assertEqual(order.permutation, ())
        self.assertEqual(order.sorted_magnitudes.size, 0)

    def test_restrict(self):
        x = [3.0, 0.0, 4.0]
        self.assertTrue(np.array_equal(restrict(x, [0]), [3.0, 0.0, 0.0]))
        self.assertTrue(np.array_equal(restrict(x, []), [0.0, 0.0, 0.0]))
        self.assertTrue(np.array_equal(restrict(x, [0, 1, 2]), x))
        with self.assertRaises(ValidationError):
            restrict(x, [3])
        rng = np.random.default_rng(11)
        for _ in range(20):
            v = rng.standard_normal(10)
            subset = rng.choice(10, size=int(rng.integers(0, 11)), replace=False)
            once = restrict(v, subset)
            self.assertTrue(np.array_equal(restrict(once, subset), once))

    def test_residual(self):
        self.assertTrue(np.array_equal(residual(np.eye(2), [1.0, 2.0], [1.0, 2.0]), [0.0, 0.0]))
        self.assertTrue(np.array_equal(residual(np.eye(2), [0.0, 0.0], [1.0, 2.0]), [1.0, 2.0]))
        a = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        self.assertTrue(np.array_equal(residual(a, [1.0, 1.0, 1.0], [2.0, 1.0]), [0.0, 0.0]))
        with self.assertRaises(ValidationError):
            residual(a, [1.0, 1.0], [2.0, 1.0])
        with self.assertRaises(ValidationError):
            residual(a, [1.0, 1.0, 1.0], [2.0, 1.0, 0.0])

    def test_support_set(self):
        self.assertEqual(support_set([3, 1, 3], 4), (1, 3))
        with self.assertRaises(ValidationError):
            support_set([4], 4)

    def test_signal_read_only(self):
        x = SparseSignal.from_values([0.0, 2.0, 0.0])
        self.assertEqual(x.support, (1,))
        self.assertEqual(x.nnz, 1)
        self.assertTrue(x.is_k_sparse(1))
        with self.assertRaises(ValueError):
            x.values[0] = 1.0

    def test_least_squares_on_support(self):
        a = np.eye(4)
        y = np.array([0.0, 5.0, 0.0, -2.0])
        self.assertTrue(np.allclose(least_squares_on_support(a, y, [1, 3]), y))
        a = np.array([[1.0, 0.0, 0.6], [0.0, 1.0, 0.8]])
        self.assertTrue(np.allclose(least_squares_on_support(a, [3.0, 4.0], [0, 1]), [3.0, 4.0, 0.0]))
        self.assertTrue(np.allclose(least_squares_on_support([[1.0], [1.0]], [1.0, 3.0], [0]), [2.0]))
        self.assertTrue(np.array_equal(least_squares_on_support(a, [3.0, 4.0], []), [0.0, 0.0, 0.0]))

    def test_least_squares_orthogonality(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            a = rng.standard_normal((20, 40)) / math.sqrt(20.0)
            y = rng.standard_normal(20)
            support = sorted(rng.choice(40, size=int(rng.integers(1, 9)), replace=False))
            r = residual(a, least_squares_on_support(a, y, support), y)
            self.assertLessEqual(float(np.max(np.abs(a[:, support].T @ r))), 1e-8 * float(np.linalg.norm(y)))

    def test_singular_support(self):
        a = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with self.assertRaises(SingularSupportError) as cm:
            least_squares_on_support(a, [1.0, 1.0], [0, 1])
        self.assertEqual(cm.exception.support, (0, 1))
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        with self.assertRaises(SingularSupportError):
            least_squares_on_support(a, [1.0, 1.0], [0, 1])


class ParserTests(TestCase):
    def test_matrix_round_trip(self):
        a = np.random.default_rng(3).standard_normal((5, 7)) / 3.0
        b = parse_matrix_csv(format_matrix_csv(a))
        self.assertTrue(np.array_equal(a, b))

    def test_read_matrix_file(self):
        a = read_matrix_file(data_file("identity4.csv"))
        self.assertTrue(np.array_equal(a, np.eye(4)))
        with self.assertRaises(ValidationError) as cm:
            read_matrix_file(data_file("invalid.csv"))
        self.assertIn("Line 3", cm.exception.messages[0])
        with self.assertRaises(ValidationError):
            parse_matrix_csv("2,2\n1,2\n")
        with self.assertRaises(ValidationError):
            parse_vector("1\nnan\n")

    def test_helpers(self):
        self.assertEqual(format_float(math.nan), "nan")
        self.assertEqual(format_float(0.5), "0.5")
        self.assertEqual(json.loads(json_dumps({"a": math.nan}))["a"], None)
        self.assertIn("δ", json_dumps({"note": "δ_{3K}"}))
        self.assertEqual(derive_seed(2024, 3), derive_seed(2024, 3))
        self.assertNotEqual(derive_seed(2024, 3), derive_seed(2024, 4))
        self.assertLess(derive_seed(2024, 3), 2**64)


class PursuitTests(TestCase):
    def test_single_step_identity(self):
        x_true = np.array([0.0, 5.0, 0.0, -2.0])
        for step in (cosamp_step, sp_step):
            x, rec = step(np.eye(4), x_true, SparseSignal.zeros(4), 2)
            self.assertTrue(np.allclose(x.values, x_true))
            self.assertEqual(x.support, (1, 3))
            self.assertEqual(rec.selected, (1, 3))

    def test_run_identity(self):
        y = np.array([0.0, 5.0, 0.0, -2.0])
        for algorithm in (COSAMP, SP):
            res = run(algorithm, np.eye(4), y, RecoveryConfig(sparsity=2, epsilon=1e-10), ground_truth=SparseSignal(y))
            self.assertTrue(res.converged)
            self.assertEqual(res.iterations_used, 1)
            self.assertEqual(res.trace.records[0].missed_energy, 0.0)
            lines = format_trace_csv(res.trace).splitlines()
            self.assertEqual(lines[0], ",".join(TRACE_CSV_HEADER))
            self.assertEqual(len(lines), 2)

    def test_zero_measurements(self):
        res = run(COSAMP, np.eye(4), np.zeros(4), RecoveryConfig(sparsity=2))
        self.assertTrue(res.converged)
        self.assertEqual(res.iterations_used, 0)
        self.assertEqual(res.estimate.nnz, 0)

    def test_max_iterations(self):
        a = gaussian_sensing_matrix(4, 12, 5)
        x = random_sparse_signal(12, 3, "gaussian", 6)
        res = run(COSAMP, a, a @ x.values, RecoveryConfig(sparsity=3, max_iterations=1))
        self.assertLessEqual(res.iterations_used, 1)
        with self.assertRaises(ValidationError):
            RecoveryConfig(sparsity=0)
        with self.assertRaises(ValidationError):
            RecoveryConfig(sparsity=2, epsilon="tight")

    def test_determinism_and_estimate_residual(self):
        a = gaussian_sensing_matrix(20, 40, 11)
        x = random_sparse_signal(40, 4, "gaussian", 12)
        y = a @ x.values
        for algorithm in (COSAMP, SP):
            r1 = run(algorithm, a, y, RecoveryConfig(sparsity=4), ground_truth=x)
            r2 = run(algorithm, a, y, RecoveryConfig(sparsity=4), ground_truth=x)
            self.assertEqual([rec.support for rec in r1.trace], [rec.support for rec in r2.trace])
            self.assertEqual([rec.residual_norm for rec in r1.trace], [rec.residual_norm for rec in r2.trace])
            previous = r1.trace.initial_residual_norm
            for rec in r1.trace:
                self.assertLessEqual(rec.estimate_residual_norm, previous + 1e-9)
                self.assertLessEqual(len(rec.support), 4)
                previous = rec.residual_norm

    def test_missed_energy(self):
        x = SparseSignal([3.0, 0.0, 4.0])
        self.assertEqual(missed_energy(x, [2]), 3.0)
        self.assertEqual(missed_energy(x, [0, 2]), 0.0)
        self.assertEqual(missed_energy(x, []), 5.0)
        self.assertEqual(missed_energy(x.values, (1,)), 5.0)

    def test_support_size_contract(self):
        k = 4
        for t in range(10):
            a = gaussian_sensing_matrix(12, 40, derive_seed(61, t))
            x = random_sparse_signal(40, k, "geometric(0.7)", derive_seed(62, t))
            e = 0.05 * np.random.default_rng(derive_seed(63, t)).standard_normal(12)
            for algorithm, merged_limit in ((COSAMP, 3 * k), (SP, 2 * k)):
                res = run(algorithm, a, a @ x.values + e, RecoveryConfig(sparsity=k), ground_truth=x)
                self.assertGreater(res.iterations_used, 0)
                for rec in res.trace:
                    self.assertLessEqual(len(rec.merged), merged_limit)
                    self.assertLessEqual(len(rec.identified), 2 * k if algorithm == COSAMP else k)
                    self.assertLessEqual(len(rec.support), k)
                    self.assertTrue(set(rec.support) <= set(rec.merged))

    def test_step_failure(self):
        a = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        config = RecoveryConfig(sparsity=2, initial_estimate=SparseSignal([0.0, 1.0, 0.0]))
        with self.assertRaises(RecoveryError) as cm:
            run(COSAMP, a, [1.0, 1.0], config)
        self.assertEqual(cm.exception.iteration, 1)

    def test_oracle_equivalence(self):
        mismatches = 0
        for t in range(100):
            seed = derive_seed(99, t)
            a = gaussian_sensing_matrix(8, 10, derive_seed(seed, 0))
            x = random_sparse_signal(10, 2, "gaussian", derive_seed(seed, 1))
            y = a @ x.values
            oracle = exhaustive_oracle_recovery(a, y, 2)
            for algorithm in (COSAMP, SP):
                res = run(algorithm, a, y, RecoveryConfig(sparsity=2))
                if res.converged and not np.allclose(res.estimate.values, oracle.values, atol=1e-6):
                    mismatches += 1
        self.assertEqual(mismatches, 0)

    @override_settings(JGREEDY_MAX_SUBSETS=10)
    def test_oracle_capacity(self):
        with self.assertRaises(CapacityError):
            exhaustive_oracle_recovery(np.eye(10), np.ones(10), 2)

    def test_exact_recovery(self):
        truth = SparseSignal([1.0, 0.0, 2.0])
        self.assertEqual(exact_recovery(SparseSignal([1.0, 0.0, 2.0]), truth), (True, 0.0))
        ok, err = exact_recovery(SparseSignal([1.0, 1e-3, 2.0]), truth)
        self.assertFalse(ok)
        self.assertGreater(err, 0.0)


class RipTests(TestCase):
    def test_exact_ric_examples(self):
        self.assertAlmostEqual(exact_ric(np.eye(3), 2).delta, 0.0, places=12)
        a = read_matrix_file(data_file("correlated.csv"))
        est = exact_ric(a, 2)
        self.assertAlmostEqual(est.delta, 1.0 / math.sqrt(2.0), places=12)
        self.assertEqual(est.subsets_examined, 3)
        self.assertIn(est.extremal_support, ((0, 2), (1, 2)))
        self.assertTrue(est.is_valid)
        self.assertAlmostEqual(exact_ric(a, 1).delta, 0.0, places=12)

    def test_monte_carlo(self):
        a = read_matrix_file(data_file("correlated.csv"))
        self.assertAlmostEqual(monte_carlo_ric_lower_bound(a, 2, 50, 1).delta, exact_ric(a, 2).delta, places=12)
        self.assertAlmostEqual(monte_carlo_ric_lower_bound(np.eye(3), 2, 10, 5).delta, 0.0, places=12)
        b = gaussian_sensing_matrix(6, 10, 4)
        for seed in range(5):
            self.assertLessEqual(monte_carlo_ric_lower_bound(b, 3, 20, seed).delta, exact_ric(b, 3).delta)

    def test_monotone_and_sandwich(self):
        a = gaussian_sensing_matrix(6, 8, 21)
        deltas = [exact_ric(a, k).delta for k in range(1, 5)]
        self.assertEqual(deltas, sorted(deltas))
        self.assertEqual(rip_sandwich_violations(a, exact_ric(a, 3), samples=1000, seed=2), 0)

    def test_parallel_enumeration(self):
        a = gaussian_sensing_matrix(6, 10, 8)
        e1 = exact_ric(a, 3)
        e2 = exact_ric(a, 3, jobs=2)
        self.assertEqual(e1.delta, e2.delta)
        self.assertEqual(e1.extremal_support, e2.extremal_support)

    @override_settings(JGREEDY_MAX_SUBSETS=10)
    def test_capacity(self):
        with self.assertRaises(CapacityError):
            exact_ric(np.eye(10), 3)


class BoundsTests(TestCase):
    def test_rho(self):
        self.assertEqual(rho_cosamp(0.0), 0.0)
        self.assertAlmostEqual(rho_cosamp(DELTA), math.sqrt(0.7), places=9)
        self.assertEqual(rho_cosamp(0.5), 1.0)
        self.assertEqual(rho_sp(0.0), 0.0)
        self.assertAlmostEqual(rho_sp(DELTA), 0.8660254, places=6)
        self.assertLess(abs(rho_sp(0.4858683) - 1.0), 1e-6)
        with self.assertRaises(DomainError):
            rho_cosamp(1.0)
        grid = np.linspace(0.0, 0.48, 50)
        self.assertTrue(all(rho_sp(a) < rho_sp(b) for a, b in zip(grid[:-1], grid[1:])))

    def test_noise_constants(self):
        self.assertEqual(tau1(0.0, 0.0), 1.0)
        self.assertEqual(tau1(0.0, 0.5), 2.0)
        self.assertAlmostEqual(tau1(DELTA, DELTA), 2.17625, places=4)
        self.assertAlmostEqual(noise_tau(0.0, 0.0), math.sqrt(2.0), places=12)
        self.assertLess(abs(noise_tau(DELTA, DELTA) - 25.01) / 25.01, 0.005)
        self.assertAlmostEqual(gamma(0.0, 0.0), 2.0 * math.sqrt(2.0), places=12)
        self.assertLess(abs(gamma(DELTA, DELTA) - 28.09) / 28.09, 0.005)
        with self.assertRaises(DomainError):
            noise_tau(0.0, 0.5)
        with self.assertRaises(DomainError):
            gamma(0.0, 0.5)

    def test_iteration_constants(self):
        self.assertLess(abs(iteration_constant_cosamp(0.4472135955) - 4.8867), 0.001)
        self.assertLess(abs(iteration_constant_sp(0.4472135955) - 5.8189), 0.001)
        self.assertAlmostEqual(iteration_constant_cosamp(0.1), 1.357, places=3)
        self.assertAlmostEqual(iteration_constant_sp(0.1), 1.357, places=2)
        self.assertEqual(iteration_constant_cosamp(0.0), 1.0)
        self.assertEqual(iteration_constant_sp(0.0), 1.0)
        self.assertLess(iteration_constant_cosamp(1e-6) - 1.0, 0.1)
        for k in range(1, 20):
            self.assertLessEqual(math.ceil(iteration_constant_cosamp(0.4472135955) * k), 5 * k)
            self.assertLessEqual(math.ceil(iteration_constant_sp(0.4472135955) * k), 6 * k)
        with self.assertRaises(DomainError):
            iteration_constant_cosamp(0.5)

    def test_dai_bound(self):
        self.assertAlmostEqual(dai_iteration_bound(DELTA, 1), 10.428, places=2)
        self.assertAlmostEqual(dai_iteration_bound(0.1, 1), 0.7728, places=3)
        self.assertAlmostEqual(dai_iteration_bound(0.1, 10), 10.0 * dai_iteration_bound(0.1, 1), places=12)
        self.assertEqual(dai_iteration_bound(0.0, 3), 0.0)
        with self.assertRaises(ValidationError):
            dai_iteration_bound(0.1, 1, DAI_RHO)
        with override_settings(JGREEDY_ENABLE_DAI_RHO=True):
            self.assertGreater(dai_iteration_bound(0.1, 1, DAI_RHO), 0.0)

    def test_kmin_and_excess(self):
        x = SparseSignal([2.0, 1.0])
        self.assertAlmostEqual(kmin_noiseless(x, DELTA), 4.512, places=2)
        self.assertEqual(kmin_noiseless(SparseSignal([0.0, 3.0, 0.0]), DELTA), 0.0)
        flat = SparseSignal([1.0, -1.0, 1.0, 1.0])
        self.assertAlmostEqual(kmin_noiseless(flat, DELTA), math.log(2.0) / math.log(1.0 / rho_cosamp(DELTA)), places=12)
        with self.assertRaises(DomainError):
            kmin_noiseless(SparseSignal.zeros(3), DELTA)
        self.assertEqual(excess_iterations(0, 1, x, DELTA, DELTA), 1)
        self.assertEqual(excess_iterations(0, 2, SparseSignal([1.0, 1.0]), DELTA, DELTA), 2)
        self.assertIsNone(excess_iterations(0, 1, x, DELTA, DELTA, 1e6))
        rng = np.random.default_rng(17)
        for _ in range(50):
            k = int(rng.integers(1, 10))
            signal = SparseSignal(rng.standard_normal(k))
            for delta in (0.1, 0.3, DELTA):
                kmin = kmin_noiseless(signal, delta)
                self.assertEqual(excess_iterations(0, k, signal, delta, delta), math.floor(kmin) + 1)
                if k > 1:
                    self.assertEqual(excess_iterations(0, k, signal, delta, delta), math.ceil(kmin))

    def test_excess_whole_number_kmin(self):
        spike = SparseSignal([0.0, 3.0, 0.0])
        for delta in (0.1, DELTA):
            self.assertEqual(kmin_noiseless(spike, delta), 0.0)
            self.assertEqual(excess_iterations(0, 1, spike, delta, delta), 1)
        flat = SparseSignal([1.0, -1.0, 1.0, 1.0])
        self.assertAlmostEqual(kmin_noiseless(flat, DELTA), 3.8867, places=3)
        self.assertEqual(excess_iterations(0, 4, flat, DELTA, DELTA), 4)
        self.assertEqual(kmin_noiseless(flat, 0.0), 0.0)
        self.assertEqual(excess_iterations(0, 4, flat, 0.0, 0.0), 1)

    def test_strict_monotonicity(self):
        grid = np.linspace(0.01, 0.48, 48)
        for func in (rho_cosamp, rho_sp, iteration_constant_cosamp, iteration_constant_sp):
            values = [func(float(d)) for d in grid]
            for lower, upper in zip(values, values[1:]):
                self.assertLess(lower, upper)

    def test_partition(self):
        schedule = greedy_partition(SparseSignal([1.0, -1.0, 1.0]), DELTA)
        self.assertEqual(len(schedule), 1)
        self.assertEqual(sorted(schedule.partitions[0]), [0, 1, 2])
        schedule = greedy_partition(SparseSignal([1.0, 8.0, 2.0, 4.0]), DELTA)
        self.assertEqual(schedule.partitions, ((1,), (3,), (2,), (0,)))
        self.assertTrue(all(k >= 1 for k in schedule.iterations))

    def test_partition_total_bound(self):
        c = iteration_constant_cosamp(0.4472135955)
        rng = np.random.default_rng(1000)
        violations = 0
        for _ in range(1000):
            k = int(rng.integers(1, 25))
            mags = np.exp(rng.uniform(-6.0, 0.0, k))
            schedule = greedy_partition(SparseSignal(mags), 0.4472135955)
            self.assertEqual(sum(len(p) for p in schedule.partitions), k)
            if schedule.total > math.ceil(c * k):
                violations += 1
        self.assertEqual(violations, 0)

    def test_thresholds(self):
        th = convergence_thresholds()
        self.assertEqual(th.delta_cosamp_rho1, 0.5)
        self.assertTrue(0.48586 < th.delta_sp_rho1 < 0.48588)
        self.assertEqual(th.delta_lemma2, 1.0 / math.sqrt(3.0))
        self.assertTrue(lemma2_rho_condition(0.49))
        self.assertFalse(lemma2_rho_condition(0.5))
        self.assertTrue(lemma2_merge_condition(0.57))
        self.assertFalse(lemma2_merge_condition(0.58))

    def test_crossover(self):
        res = crossover_delta(SAME_RHO)
        self.assertLess(abs(res.delta - 0.280), 0.001)
        self.assertGreater(res.endpoint_values[0], 0.0)
        self.assertLess(res.endpoint_values[1], 0.0)
        self.assertLess(iteration_constant_sp(0.4), dai_iteration_bound(0.4, 1))
        self.assertGreater(iteration_constant_sp(0.01), dai_iteration_bound(0.01, 1))
        with override_settings(JGREEDY_ENABLE_DAI_RHO=True):
            res = crossover_delta(DAI_RHO)
            self.assertTrue(0.0 < res.delta < 0.21)

    def test_bounds_rows(self):
        row = bounds_row(0.0)
        self.assertEqual((row.c_cosamp, row.c_sp, row.dai_per_k_same_rho), (1.0, 1.0, 0.0))
        row = bounds_row(0.4472135955)
        self.assertLess(abs(row.c_cosamp - 4.8867), 0.001)
        self.assertLess(abs(row.c_sp - 5.8189), 0.001)
        self.assertTrue(math.isfinite(bounds_row(0.4858).c_sp))
        self.assertTrue(math.isnan(bounds_row(0.4859).c_sp))
        self.assertTrue(math.isnan(bounds_row(0.6).c_cosamp))
        rows = bounds_sweep(0.0, 0.9, 10)
        self.assertEqual(len(rows), 10)
        lines = format_bounds_csv(rows).splitlines()
        self.assertEqual(lines[0], "delta,rho_4k,rho_3k,c_cosamp,c_sp,dai_per_k")
        self.assertIn("nan", lines[-1])
        with self.assertRaises(ValidationError):
            bounds_sweep(0.1, 0.2, 1)


class ExperimentTests(TestCase):
    def test_sensing_matrix(self):
        a = gaussian_sensing_matrix(4, 8, 1)
        self.assertEqual(a.shape, (4, 8))
        self.assertTrue(np.array_equal(a, gaussian_sensing_matrix(4, 8, 1)))
        norms = np.sum(gaussian_sensing_matrix(256, 16, 0) ** 2, axis=0)
        self.assertTrue(np.all((norms >= 0.7) & (norms <= 1.3)))

    def test_random_signal(self):
        x = random_sparse_signal(8, 3, "flat", 2)
        self.assertEqual(x.nnz, 3)
        self.assertTrue(np.all(np.abs(x.values[list(x.support)]) == 1.0))
        self.assertEqual(random_sparse_signal(8, 8, "gaussian", 3).nnz, 8)
        x = random_sparse_signal(10, 4, "geometric(0.5)", 4)
        self.assertTrue(np.array_equal(magnitude_order(x.values).sorted_magnitudes[:4], [1.0, 0.5, 0.25, 0.125]))
        with self.assertRaises(ValidationError):
            random_sparse_signal(8, 3, "cauchy", 2)

    def test_trial_reproducibility(self):
        config = TrialConfig(m=16, n=32, k=3, algorithm=COSAMP, master_seed=5, trials=1)
        rec = run_trials(config)[0]
        inst = instance_for_trial(config, 0)
        res = run(COSAMP, inst.a, inst.y, RecoveryConfig(sparsity=3))
        self.assertEqual(rec.seed, derive_seed(5, 0))
        self.assertEqual(rec.iterations_used, res.iterations_used)
        self.assertEqual(rec.exact_recovery, exact_recovery(res.estimate, inst.x)[0])
        config = TrialConfig(m=16, n=32, k=3, algorithm=SP, master_seed=5, trials=5)
        records = run_trials(config)
        self.assertEqual(records[3], run_single_trial(config, 3))
        self.assertEqual(records, run_trials(config, jobs=2))

    def test_trial_config(self):
        with self.assertRaises(ValidationError):
            TrialConfig(m=4, n=8, k=5)
        with self.assertRaises(ValidationError):
            TrialConfig(m=4, n=8, k=2, trials=0)
        with self.assertRaises(ValidationError):
            TrialConfig(m=4, n=8, k=2, algorithm="omp")
        with self.assertRaises(ValidationError):
            TrialConfig(m=8, n=12, k=2, ensemble=PERTURBED_IDENTITY)
        with self.assertRaises(ValidationError):
            TrialConfig(m=8, n=8, k=2, ensemble="bernoulli")
        config = TrialConfig(m=6, n=6, k=1, ensemble=PERTURBED_IDENTITY, perturbation=0.0)
        self.assertTrue(np.array_equal(instance_for_trial(config, 0).a, np.eye(6)))

    def test_noisy_trials(self):
        config = TrialConfig(m=32, n=64, k=4, noise_sigma=1.0, master_seed=3, trials=10)
        records = run_trials(config)
        self.assertFalse(any(r.exact_recovery for r in records))
        self.assertFalse(any(r.failed for r in records))

    def test_statistical_recovery(self):
        for algorithm in (COSAMP, SP):
            config = TrialConfig(m=128, n=256, k=8, algorithm=algorithm, master_seed=2024, trials=200)
            summary = summarize_trials(config, run_trials(config))
            self.assertGreaterEqual(summary["success_fraction"], 0.95)
            self.assertLessEqual(summary["max_iterations"], 40)

    def test_certified_trials(self):
        config = TrialConfig(m=8, n=12, k=1, algorithm=COSAMP, master_seed=1, trials=4, certify=True)
        records = run_trials(config)
        self.assertTrue(all(r.delta is not None for r in records))
        summary = summarize_trials(config, records)
        self.assertEqual(summary["violations"], 0)
        lines = format_experiment_csv(config, records).splitlines()
        self.assertEqual(lines[0], ",".join(EXPERIMENT_CSV_HEADER))
        self.assertEqual(len(lines), 5)
        exp = store_trial_records(config, records)
        self.assertEqual(ExperimentRun.objects.count(), 1)
        self.assertEqual(TrialResult.objects.filter(run=exp).count(), 4)

    def test_decay_validation(self):
        for algorithm in (COSAMP, SP):
            config = TrialConfig(m=8, n=12, k=2, algorithm=algorithm, master_seed=2024, trials=50)
            report = decay_validation(config)
            self.assertEqual(report.violation_count, 0)
            self.assertEqual(report.hypothesis_met, 0)
            self.assertEqual(report.hypothesis_not_met, 50)
            self.assertEqual(report.checked_iterations, 0)

    def test_decay_validation_perturbed_identity(self):
        for algorithm in (COSAMP, SP):
            config = TrialConfig(m=12, n=12, k=2, algorithm=algorithm, ensemble=PERTURBED_IDENTITY, master_seed=2024, trials=10)
            report = decay_validation(config)
            self.assertEqual(report.hypothesis_met, 10)
            self.assertEqual(report.hypothesis_not_met, 0)
            self.assertGreater(report.checked_iterations, 0)
            self.assertEqual(report.violation_count, 0)
        config = TrialConfig(m=12, n=12, k=2, algorithm=COSAMP, ensemble=PERTURBED_IDENTITY, noise_sigma=1e-3, master_seed=2024, trials=5)
        report = decay_validation(config)
        self.assertEqual(report.hypothesis_met, 5)
        self.assertGreater(report.checked_iterations, 0)
        self.assertEqual(report.violation_count, 0)

    def test_decay_perturbed_identity(self):
        a = perturbed_identity_matrix(12, 0.01, 31)
        x = random_sparse_signal(12, 2, "gaussian", 32)
        delta_4k = exact_ric(a, 8).delta
        delta_3k = exact_ric(a, 6).delta
        res = check_decay(a, x, COSAMP, delta_4k=delta_4k)
        self.assertTrue(res.hypothesis_met)
        self.assertEqual(res.violation_count, 0)
        self.assertGreater(res.checked_iterations, 0)
        e = 1e-3 * np.random.default_rng(33).standard_normal(12)
        res = check_decay(a, x, COSAMP, delta_4k=delta_4k, delta_3k=delta_3k, e=e, config=RecoveryConfig(sparsity=2, max_iterations=5))
        self.assertEqual(res.violation_count, 0)
        res = check_decay(a, x, SP, delta_3k=delta_3k)
        self.assertTrue(res.hypothesis_met)
        self.assertEqual(res.violation_count, 0)

    def test_decay_identity(self):
        x = SparseSignal([0.0, 3.0, 0.0, -1.0, 0.0, 0.0])
        res = check_decay(np.eye(6), x, COSAMP, delta_4k=0.0)
        self.assertEqual(res.missed_energy[0], 0.0)
        self.assertEqual(res.iterations, 1)
        res = check_decay(np.eye(6), x, COSAMP, delta_4k=0.6)
        self.assertFalse(res.hypothesis_met)
        self.assertEqual(res.checked_iterations, 0)

    def test_iteration_bound(self):
        x = random_sparse_signal(12, 2, "flat", 41)
        res = check_iteration_bound(np.eye(12), x, COSAMP, 0.0)
        self.assertEqual(res.iterations, 1)
        self.assertEqual(res.bound, 2)
        self.assertFalse(res.bound_violated)
        a = perturbed_identity_matrix(12, 0.01, 42)
        for algorithm, order in ((COSAMP, 8), (SP, 6)):
            res = check_iteration_bound(a, x, algorithm, exact_ric(a, order).delta)
            self.assertTrue(res.hypothesis_met)
            self.assertFalse(res.bound_violated)
        res = check_iteration_bound(a, x, COSAMP, exact_ric(a, 8).delta)
        self.assertFalse(res.partition_violated)
        config = TrialConfig(m=8, n=12, k=2, algorithm=COSAMP, master_seed=2024, trials=20)
        summary = iteration_bound_experiment(config)
        self.assertEqual(summary.hypothesis_met_count, 0)
        self.assertEqual(summary.violations, 0)

    def test_iteration_bound_perturbed_identity(self):
        for algorithm in (COSAMP, SP):
            config = TrialConfig(m=12, n=12, k=2, algorithm=algorithm, distribution="flat", ensemble=PERTURBED_IDENTITY, master_seed=2024, trials=10)
            summary = iteration_bound_experiment(config)
            self.assertEqual(summary.hypothesis_met_count, 10)
            self.assertGreater(summary.max_observed, 0)
            self.assertLessEqual(summary.max_observed, summary.max_bound)
            self.assertEqual(summary.violations, 0)
            self.assertEqual(summary.partition_violations, 0)
            data = summary.as_dict()
            if algorithm == COSAMP:
                self.assertGreaterEqual(data["kmin_excess"], 1)
            else:
                self.assertIsNone(data["kmin_excess"])

    @override_settings(JGREEDY_MAX_SUBSETS=10)
    def test_decay_capacity(self):
        with self.assertRaises(CapacityError):
            decay_validation(TrialConfig(m=8, n=12, k=2, trials=1))


class CommandTests(TestCase):
    def call(self, *args) -> str:
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err)
        self.assertIn("config:", err.getvalue())
        return out.getvalue()

    def test_bounds(self):
        lines = self.call("bounds", "--delta", "0.4472135955").splitlines()
        self.assertEqual(len(lines), 2)
        self.assertLess(abs(float(lines[1].split(",")[3]) - 4.8867), 0.001)
        lines = self.call("sweep", "--delta-min", "0", "--delta-max", "0.9", "--steps", "4").splitlines()
        self.assertEqual(len(lines), 5)
        with self.assertRaises(CommandError) as cm:
            self.call("bounds", "--delta", "0.1", "--steps", "3")
        self.assertEqual(cm.exception.returncode, 1)

    def test_recover(self):
        with tempfile.TemporaryDirectory() as tmp:
            trace = join(tmp, "trace.csv")
            out = self.call(
                "recover",
                "--algorithm",
                "cosamp",
                "--matrix",
                data_file("identity4.csv"),
                "--measurements",
                data_file("identity4-y.txt"),
                "--sparsity",
                "2",
                "--epsilon",
                "1e-10",
                "--trace",
                trace,
            )
            self.assertTrue(np.allclose(parse_vector(out), [0.0, 5.0, 0.0, -2.0]))
            with open(trace, "rt", encoding="utf-8") as fp:
                self.assertEqual(len(fp.read().splitlines()), 2)

    def test_ric(self):
        out = self.call("ric", "--matrix", data_file("correlated.csv"), "--order", "2", "--method", "exact")
        self.assertIn("0.7071067", out)
        out = self.call("ric", "--matrix", data_file("correlated.csv"), "--order", "2", "--method", "monte-carlo", "--trials", "50", "--seed", "1")
        self.assertIn("monte_carlo_lower_bound", out)

    def test_exit_codes(self):
        with self.assertRaises(CommandError) as cm:
            self.call("ric", "--matrix", data_file("missing.csv"), "--order", "2")
        self.assertEqual(cm.exception.returncode, 2)
        with self.assertRaises(CommandError) as cm:
            self.call("ric", "--matrix", data_file("invalid.csv"), "--order", "2")
        self.assertEqual(cm.exception.returncode, 1)
        with self.assertRaises(CommandError) as cm:
            call_command("ric", "--matrix", data_file("correlated.csv"), "--order", "2", "--bogus", stdout=StringIO(), stderr=StringIO())
        self.assertEqual(cm.exception.returncode, 1)
        report = DecayReport(algorithm=COSAMP, m=8, n=12, k=2, trials=1, violations={"decay": 1})
        with mock.patch("jgreedy.management.commands.decay.decay_validation", return_value=report):
            with self.assertRaises(CommandError) as cm:
                self.call("decay", "--m", "8", "--n", "12", "--k", "2", "--algorithm", "cosamp", "--trials", "1")
        self.assertEqual(cm.exception.returncode, 3)

    def test_help_lists_defaults(self):
        text = BoundsCommand().create_parser("manage.py", "bounds").format_help()
        self.assertIn("--enable-dai-rho", text)
        self.assertIn("(default: -)", text)

    def test_crossover_and_partition(self):
        out = self.call("crossover")
        self.assertIn("0.0446<δ_{3K}<0.4859", out)
        data = json.loads(out)
        self.assertLess(abs(data["delta"] - 0.280), 0.001)
        self.assertEqual(data["delta_cosamp_rho1"], 0.5)
        self.assertIn("0.0446", data["note"])
        data = json.loads(self.call("partition", "--signal", data_file("signal.txt"), "--delta", "0.4472135955"))
        self.assertEqual(data["partitions"], [[0], [1]])
        self.assertEqual(data["total"], sum(data["iterations"]))
        self.assertLessEqual(data["total"], data["bound"])

    def test_experiment_and_decay(self):
        with tempfile.TemporaryDirectory() as tmp:
            summary_file = join(tmp, "summary.json")
            out = self.call("experiment", "--m", "8", "--n", "12", "--k", "1", "--algorithm", "sp", "--trials", "3", "--summary", summary_file, "--commit")
            self.assertEqual(len(out.splitlines()), 4)
            with open(summary_file, "rt", encoding="utf-8") as fp:
                self.assertIn("success_fraction", json.load(fp))
            self.assertTrue(os.path.isfile(summary_file))
        self.assertEqual(ExperimentRun.objects.count(), 1)
        data = json.loads(self.call("decay", "--m", "8", "--n", "12", "--k", "2", "--algorithm", "cosamp", "--trials", "5", "--check-bound"))
        self.assertEqual(data["decay"]["violations"], 0)
        self.assertEqual(data["iteration_bound"]["violations"], 0)
        args = ["--m", "12", "--n", "12", "--k", "2", "--algorithm", "cosamp", "--trials", "3", "--ensemble", "perturbed_identity", "--check-bound"]
        data = json.loads(self.call("decay", *args))
        self.assertEqual(data["decay"]["hypothesis_met"], 3)
        self.assertGreater(data["decay"]["checked_iterations"], 0)
        self.assertEqual(data["iteration_bound"]["hypothesis_met_count"], 3)
        self.assertEqual(data["iteration_bound"]["violations"], 0)
