"""Tests of the experiment drivers, fitting harness, and report plumbing."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats as sstats

from conftest import clustered_unit_family, random_unit_family
from tangencylab import experiments as ex
from tangencylab.errors import DegenerateSweepError, InvalidParamsError, ValidationError
from tangencylab.families import CircleFamily, gen_clamshell, gen_integer_lattice, unit_box
from tangencylab.geometry import is_exact_tangent_int


class TestScalingSweep:
    def test_exact_power_law(self):
        xs = [1.0, 2.0, 4.0, 8.0]
        fit = ex.scaling_sweep(xs, [x ** (4 / 3) for x in xs])
        assert fit.slope == pytest.approx(4 / 3, abs=1e-9)

    def test_constant_data(self):
        fit = ex.scaling_sweep([1, 2, 4, 8], [3.5] * 4)
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_noisy_power_law(self):
        rng = np.random.default_rng(0)
        xs = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
        ys = xs ** (4 / 3) * (1 + 0.01 * rng.standard_normal(5))
        fit = ex.scaling_sweep(xs, ys)
        assert abs(fit.slope - 4 / 3) < 0.05

    def test_degenerate(self):
        with pytest.raises(DegenerateSweepError):
            ex.scaling_sweep([2, 2, 2], [1, 2, 3])


class TestChernoff:
    def test_exact_tails_match_scipy(self):
        for n, p in [(100, 0.05), (100, 0.1), (1000, 0.01)]:
            eu, el = ex.exact_binomial_tails(n, Fraction(str(p)))
            assert float(eu) == pytest.approx(sstats.binom.sf(math.floor(10 * n * p), n, p), rel=1e-9)
            k_below = math.ceil(n * p / 10) - 1
            assert float(el) == pytest.approx(sstats.binom.cdf(k_below, n, p), rel=1e-9)

    def test_bounds_hold_and_mc_consistent(self):
        rep = ex.chernoff_tails(100, 0.05, 200_000, seed=7)
        assert rep.summary["gates_pass"]
        assert rep.summary["upper_freq"] == 0.0
        assert rep.summary["lower_freq"] <= rep.summary["lower_bound"]

    def test_small_p_limit_identity(self):
        # P(S = 0) = (1-p)^n stays below exp(-n p / 2) whenever p <= 0.5
        for n, p in itertools.product([10, 100, 1000], [0.001, 0.01, 0.1, 0.3, 0.5]):
            lhs = Fraction(1) - Fraction(str(p))
            assert ex._leq_exp_bound(lhs**n, -n * float(Fraction(str(p))) / 2.0)

    def test_validation(self):
        with pytest.raises(ValidationError):
            ex.chernoff_tails(0, 0.5, 10)
        with pytest.raises(ValidationError):
            ex.chernoff_tails(10, 1.5, 10)

    def test_zero_tail_beyond_support(self):
        eu, _ = ex.exact_binomial_tails(100, Fraction(1, 10))
        # 10 n p equals n: no mass strictly above
        assert eu == 0


class TestRectangleBound:
    def test_small_sweep_passes_gate(self):
        rep = ex.run_rectangle_bound([64, 128, 256], slope_gate=0.35)
        assert rep.summary["gates_pass"]
        assert abs(rep.summary["slope"]) < 0.35
        for row in rep.rows:
            assert row["pass"] == "1"

    def test_single_plank_ratio_identity(self):
        # a family fully inside one plank realizes mu^(4/3) * 1 / mu^(4/3) = 1
        from tangencylab.geometry import Lightplank, plank_axes
        from tangencylab.planks import RichnessTable

        mu = 16
        table = RichnessTable(mu_buckets={mu: 1}, n_rich=1, max_richness=mu)
        lhs, mu_hat = ex._max_bucket_metric(table)
        assert lhs / mu ** (4 / 3) == pytest.approx(1.0)
        assert mu_hat == mu

    def test_clamshell_control_flagged(self):
        rep = ex.run_rectangle_bound([64, 128], include_control=True, control_N=30)
        control = rep.rows[-1]
        assert control["pass"] == "flagged"
        assert control["ratio"] > 0


class TestCtBound:
    def test_reference_configuration_frozen(self):
        rep = ex.run_ct_bound([1 / 64], rho=4.0)
        row = rep.rows[0]
        assert row["pass"] == "1"
        assert row["lhs"] == 5030296  # frozen ordered count
        assert row["mu_hat"] == 32  # cap witness: constant-1 bound just misses
        assert rep.summary["gates_pass"]

    def test_trivial_inequality_smallest_mu(self):
        # zero pairs always certify the smallest dyadic witness
        rep = ex.run_ct_bound([1 / 8], rho=2.0)
        assert rep.rows[0]["mu_hat"] >= 1


class TestExactCt:
    def test_counts_match_python_oracle(self):
        rep = ex.run_exact_ct([2, 3])
        for n, count in zip([2, 3], rep.summary["counts_unordered"]):
            fam = gen_integer_lattice(n)
            expected = sum(
                1
                for i, j in itertools.combinations(range(len(fam)), 2)
                if is_exact_tangent_int(fam.circle(i), fam.circle(j))
            )
            assert count == expected

    def test_lattice_flags_degeneracies(self):
        rep = ex.run_exact_ct([4])
        row = rep.rows[0]
        assert row["pass"] == "flagged"  # unit spacing and embedded light rays
        assert row["mu_hat"] > 0  # rays carrying three or more points exist

    def test_clamshell_integer_fully_degenerate(self):
        fam = gen_clamshell(10, integer=True)
        from tangencylab.incidence import count_ct0_exact

        pairs = count_ct0_exact(fam)
        assert len(pairs) == 45
        assert ex.light_ray_degeneracy(fam, pairs) == 1  # one ray, all points


class TestLemma28:
    def test_single_pair(self):
        pts = np.array([[0.0, 0.0, 1.0], [0.3, 0.0, 1.3]])
        fam = CircleFamily(pts, 1.0, 0.0, unit_box(), {"generator": "pair"})
        rep = ex.run_lemma28_check(fam, 0.01, A=2.0)
        assert len(rep.rows) == 1
        row = rep.rows[0]
        assert row["lhs"] == 1.0
        assert row["rhs"] >= 4.0
        assert row["ratio"] <= 0.25
        assert rep.summary["gates_pass"]

    def test_clamshell_order_one_ratio(self):
        N = 60
        rep = ex.run_lemma28_check(gen_clamshell(N), 0.01, A=2.0)
        assert rep.summary["gates_pass"]
        assert 0.005 <= rep.summary["max_ratio"] <= 10.0
        # the widest bucket is covered by very few planks holding many points
        top = max(rep.summary["per_scale"])
        assert rep.summary["per_scale"][top]["planks"] <= 5

    def test_random_families_coverage_and_incomparability(self):
        for seed in (0, 1, 2):
            fam = clustered_unit_family(seed + 70, 300)
            rep = ex.run_lemma28_check(fam, 0.02, A=2.0)
            assert rep.summary["gates_pass"]
            for detail in rep.summary["per_scale"].values():
                assert detail["incomparability_violations"] == 0


class TestSharpness:
    def test_summary_fields_and_gate_split(self):
        rep = ex.run_sharpness(R=2**8, rho=2**4, eps=0.25, seeds=[0, 1])
        s = rep.summary
        assert s["n_seeds"] == 2
        assert set(s["per_seed"][0]) >= {
            "occupancy_ok", "plank_ok_stated", "plank_ok_exact", "bucket_concentration",
        }
        assert s["n_pass_occupancy"] == 2  # occupancy holds easily at this scale

    def test_invalid_rho(self):
        with pytest.raises(InvalidParamsError):
            ex.run_sharpness(R=2**8, rho=2**5, eps=0.2, seeds=[0])  # rho > sqrt(R)


class TestReports:
    def test_csv_columns_fixed_and_reproducible(self, tmp_path):
        rep1 = ex.run_rectangle_bound([64, 128], slope_gate=0.35)
        rep2 = ex.run_rectangle_bound([64, 128], slope_gate=0.35)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        rep1.write_csv(p1)
        rep2.write_csv(p2)
        strip = lambda text: [
            ",".join(cell for k, cell in enumerate(line.split(",")) if k != 12)
            for line in text.splitlines()
        ]
        assert strip(p1.read_text()) == strip(p2.read_text())
        header = p1.read_text().splitlines()[1].split(",")
        assert header == ex.CSV_COLUMNS

    def test_json_summary_written(self, tmp_path):
        rep = ex.chernoff_tails(50, 0.1, 1000, seed=1)
        out = tmp_path / "r.json"
        rep.write_json(out)
        import json

        data = json.loads(out.read_text())
        assert data["experiment"] == "chernoff"
        assert "gates_pass" in data["summary"]

    def test_ct_row_recomputable_from_serialized_family(self, tmp_path):
        # a report row's count must be reproducible by the brute-force path
        # on the family rebuilt from its serialized form
        from tangencylab.families import gen_maximal_separated, load_family
        from tangencylab.incidence import count_ct_delta_bruteforce

        delta, rho = 1 / 16, 4.0
        rep = ex.run_ct_bound([delta], rho=rho)
        row = rep.rows[0]
        fam = gen_maximal_separated(1 / delta, rho, box_kind="annular").rescale(delta)
        path = tmp_path / "fam.txt"
        fam.save(path)
        back = load_family(path)
        assert len(back) <= 2000
        assert count_ct_delta_bruteforce(back, delta).ordered_count == row["lhs"]
