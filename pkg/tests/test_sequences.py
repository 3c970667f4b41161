import numpy as np
import pytest
from scipy.integrate import quad

from mgsched.sequences import (ProbSeq, StepMismatchError, add_convolve,
                               discretize, el_sequence, expectation,
                               load_sequence, point_mass, sub_convolve,
                               write_sequence_csv)
from mgsched.stochastic import LoadModel, PvModel, pv_output_pdf


def random_seq(rng, max_len=20, step=2.5) -> ProbSeq:
    n = int(rng.integers(1, max_len + 1))
    raw = rng.random(n) + 1e-12
    return ProbSeq(raw / raw.sum(), step)


class TestProbSeq:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ProbSeq(np.array([0.5, -0.1, 0.6]), 1.0)

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            ProbSeq(np.array([0.5, 0.4]), 1.0)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            ProbSeq(np.array([1.0]), 0.0)

    def test_levels(self):
        seq = ProbSeq(np.array([0.5, 0.5]), 10.0)
        assert np.allclose(seq.levels(), [0.0, 10.0])


class TestExpectation:
    def test_point_mass_is_zero(self):
        assert expectation(point_mass(2.5)) == 0.0

    def test_two_levels(self):
        assert expectation(ProbSeq(np.array([0.5, 0.5]), 10.0)) == pytest.approx(5.0)

    def test_truncated_normal_matches_monte_carlo(self):
        seq = load_sequence(LoadModel(mu=100.0, sigma=10.0), 195.0, 2.5)
        rng = np.random.default_rng(42)
        samples = rng.normal(100.0, 10.0, 10 ** 6)
        samples = samples[(samples >= 0.0) & (samples <= 195.0)]
        assert expectation(seq) == pytest.approx(samples.mean(), abs=0.5)


class TestDiscretize:
    def test_index_length(self):
        model = PvModel(lambda1=2.0, lambda2=2.0, p_max=120.0)
        seq = discretize(lambda p: pv_output_pdf(model, p), 120.0, 2.5)
        assert seq.max_index == 48

    def test_point_mass_support(self):
        seq = discretize(None, 0.0, 2.5)
        assert np.array_equal(seq.probs, [1.0])

    def test_bins_match_quadrature(self):
        model = PvModel(lambda1=2.0, lambda2=2.0, p_max=10.0)
        q = 2.5
        seq = discretize(lambda p: pv_output_pdf(model, p), 10.0, q)
        assert seq.max_index == 4
        edges = [(0.0, 1.25), (1.25, 3.75), (3.75, 6.25), (6.25, 8.75), (8.75, 10.0)]
        expected = np.array([quad(lambda p: pv_output_pdf(model, p), lo, hi,
                                  epsabs=1e-12, epsrel=1e-12)[0]
                             for lo, hi in edges])
        expected /= expected.sum()
        assert np.allclose(seq.probs, expected, atol=1e-8)

    def test_atom_lands_in_containing_bin(self):
        seq = discretize(None, 60.0, 2.5, atoms=[(60.0, 0.25), (0.0, 0.75)])
        assert seq.probs[24] == pytest.approx(0.25)
        assert seq.probs[0] == pytest.approx(0.75)

    def test_invalid_step(self):
        with pytest.raises(ValueError):
            discretize(None, 10.0, 0.0)

    def test_expectation_within_step_of_analytic_mean(self):
        for l1, l2 in [(2.0, 2.0), (2.0, 5.0), (3.0, 1.5)]:
            model = PvModel(lambda1=l1, lambda2=l2, p_max=120.0)
            seq = discretize(lambda p: pv_output_pdf(model, p), 120.0, 2.5)
            analytic = 120.0 * l1 / (l1 + l2)
            assert abs(expectation(seq) - analytic) <= 2.5


class TestAddConvolve:
    def test_identity_element(self):
        rng = np.random.default_rng(0)
        b = random_seq(rng)
        out = add_convolve(point_mass(b.step), b)
        assert np.allclose(out.probs, b.probs, atol=1e-15)

    def test_two_coin_flips(self):
        half = ProbSeq(np.array([0.5, 0.5]), 1.0)
        out = add_convolve(half, half)
        assert np.allclose(out.probs, [0.25, 0.5, 0.25])

    def test_matches_pair_enumeration(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            a, b = random_seq(rng), random_seq(rng)
            out = add_convolve(a, b)
            brute = np.zeros(len(a) + len(b) - 1)
            for i, pa in enumerate(a.probs):
                for j, pb in enumerate(b.probs):
                    brute[i + j] += pa * pb
            assert np.allclose(out.probs, brute, atol=1e-12)

    def test_expectation_is_additive(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, b = random_seq(rng), random_seq(rng)
            assert expectation(add_convolve(a, b)) == pytest.approx(
                expectation(a) + expectation(b), abs=1e-9)

    def test_commutative_and_associative(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            a, b, c = (random_seq(rng) for _ in range(3))
            ab = add_convolve(a, b)
            ba = add_convolve(b, a)
            assert np.allclose(ab.probs, ba.probs, atol=1e-12)
            left = add_convolve(ab, c)
            right = add_convolve(a, add_convolve(b, c))
            assert np.allclose(left.probs, right.probs, atol=1e-12)

    def test_step_mismatch(self):
        with pytest.raises(StepMismatchError):
            add_convolve(point_mass(1.0), point_mass(2.0))


class TestSubConvolve:
    def test_subtracting_point_mass(self):
        rng = np.random.default_rng(4)
        d = random_seq(rng)
        out = sub_convolve(d, point_mass(d.step))
        assert np.allclose(out.probs, d.probs, atol=1e-15)

    def test_truncation_collects_nonpositive(self):
        half = ProbSeq(np.array([0.5, 0.5]), 1.0)
        out = sub_convolve(half, half)
        assert np.allclose(out.probs, [0.75, 0.25])

    def test_output_length_equals_minuend(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            d, c = random_seq(rng), random_seq(rng)
            assert len(sub_convolve(d, c)) == len(d)

    def test_total_probability_conserved(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            d, c = random_seq(rng), random_seq(rng)
            assert sub_convolve(d, c).probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_matches_pair_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            d, c = random_seq(rng), random_seq(rng)
            out = sub_convolve(d, c)
            brute = np.zeros(len(d))
            for i, pd_ in enumerate(d.probs):
                for j, pc in enumerate(c.probs):
                    brute[max(i - j, 0)] += pd_ * pc
            assert np.allclose(out.probs, brute, atol=1e-12)


class TestElSequence:
    def test_no_renewables_identity(self):
        rng = np.random.default_rng(8)
        d = random_seq(rng)
        e, expected = el_sequence(d, point_mass(d.step), point_mass(d.step))
        assert np.allclose(e.probs, d.probs, atol=1e-15)
        assert expected == pytest.approx(expectation(d), abs=1e-12)
        assert expectation(e) == pytest.approx(expected, abs=1e-12)

    def test_truncation_free_case_matches_balance_value(self):
        # load well above renewables: no probability of negative net demand
        d = ProbSeq(np.array([0.0] * 10 + [0.5, 0.5]), 1.0)
        a = ProbSeq(np.array([0.5, 0.5]), 1.0)
        b = ProbSeq(np.array([0.7, 0.3]), 1.0)
        e, expected = el_sequence(d, a, b)
        assert expectation(e) == pytest.approx(expected, abs=1e-9)

    def test_truncation_inflates_expectation(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            d, a, b = (random_seq(rng) for _ in range(3))
            e, expected = el_sequence(d, a, b)
            assert expectation(e) >= expected - 1e-9


def test_sequence_csv_dump(tmp_path):
    seq = ProbSeq(np.array([0.25, 0.75]), 2.5)
    path = tmp_path / "seq.csv"
    write_sequence_csv(path, seq)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "index,power_kw,probability"
    assert lines[1] == "0,0.0,0.25"
    assert lines[2] == "1,2.5,0.75"
