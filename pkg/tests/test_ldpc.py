"""LDPC construction, encoding, decoding, and alist interchange."""

import numpy as np
import pytest

from jscclab.baseline.ldpc import (LdpcCode, _gf2_systematize, from_alist,
                                   ldpc_decode, ldpc_encode, make_regular_ldpc,
                                   shipped_code, syndrome_ok, to_alist)

RNG = np.random.Generator(np.random.Philox(key=[0, 0x1D9C]))
SMALL = make_regular_ldpc(n=128, m=64, seed=0)


class TestConstruction:
    def test_column_weight_regular(self):
        np.testing.assert_array_equal(SMALL.H.sum(axis=0), 3)

    def test_no_four_cycles(self):
        # any two columns share at most one row
        overlap = SMALL.H.T.astype(np.int64) @ SMALL.H.astype(np.int64)
        off_diag = overlap - np.diag(np.diag(overlap))
        assert off_diag.max() <= 1

    def test_dimensions_and_rate(self):
        assert (SMALL.n, SMALL.m, SMALL.k_info) == (128, 64, 64)
        assert SMALL.rate == pytest.approx(0.5)

    def test_deterministic_given_seed(self):
        again = make_regular_ldpc(n=128, m=64, seed=0)
        np.testing.assert_array_equal(again.H, SMALL.H)

    def test_systematize_rejects_rank_deficiency(self):
        H = np.ones((2, 4), dtype=np.uint8)  # duplicate rows
        with pytest.raises(ValueError, match="rank"):
            _gf2_systematize(H)


class TestEncoding:
    def test_all_codewords_satisfy_parity(self):
        for _ in range(20):
            u = RNG.integers(0, 2, SMALL.k_info, dtype=np.uint8)
            assert syndrome_ok(ldpc_encode(u, SMALL), SMALL)

    def test_systematic_payload_recoverable(self):
        u = RNG.integers(0, 2, SMALL.k_info, dtype=np.uint8)
        c = ldpc_encode(u, SMALL)
        np.testing.assert_array_equal(c[SMALL.info_cols], u)

    def test_short_payload_zero_padded(self):
        c = ldpc_encode(np.array([1, 0, 1], dtype=np.uint8), SMALL)
        assert syndrome_ok(c, SMALL)
        np.testing.assert_array_equal(c[SMALL.info_cols][:3], [1, 0, 1])
        np.testing.assert_array_equal(c[SMALL.info_cols][3:], 0)

    def test_oversized_payload_rejected(self):
        with pytest.raises(ValueError):
            ldpc_encode(np.zeros(SMALL.k_info + 1, dtype=np.uint8), SMALL)


class TestDecoding:
    def test_noiseless_identity(self):
        for _ in range(10):
            u = RNG.integers(0, 2, SMALL.k_info, dtype=np.uint8)
            c = ldpc_encode(u, SMALL)
            llrs = np.where(c == 0, 20.0, -20.0)
            decoded, converged = ldpc_decode(llrs, SMALL)
            assert converged
            np.testing.assert_array_equal(decoded, c)

    def test_corrects_a_few_weak_bits(self):
        u = RNG.integers(0, 2, SMALL.k_info, dtype=np.uint8)
        c = ldpc_encode(u, SMALL)
        llrs = np.where(c == 0, 8.0, -8.0)
        flip = RNG.choice(SMALL.n, size=4, replace=False)
        llrs[flip] *= -0.25  # weakly wrong
        decoded, converged = ldpc_decode(llrs, SMALL)
        assert converged
        np.testing.assert_array_equal(decoded, c)

    def test_hopeless_input_reports_failure(self):
        llrs = RNG.normal(0, 0.3, SMALL.n)
        _, converged = ldpc_decode(llrs, SMALL, max_iters=5)
        assert not converged

    def test_llr_length_validated(self):
        with pytest.raises(ValueError):
            ldpc_decode(np.zeros(10), SMALL)


class TestAlist:
    def test_roundtrip(self):
        back = from_alist(to_alist(SMALL))
        np.testing.assert_array_equal(back.H, SMALL.H)
        np.testing.assert_array_equal(back.info_cols, SMALL.info_cols)

    def test_header_fields(self):
        lines = to_alist(SMALL).splitlines()
        assert lines[0] == "128 64"
        dv, dc = lines[1].split()
        assert int(dv) == 3

    @pytest.mark.parametrize("rate,m", [("1/3", 682), ("1/2", 512), ("2/3", 341)])
    def test_shipped_codes(self, rate, m):
        code = shipped_code(rate)
        assert (code.n, code.m) == (1024, m)
        np.testing.assert_array_equal(code.H.sum(axis=0), 3)
        u = RNG.integers(0, 2, code.k_info, dtype=np.uint8)
        assert syndrome_ok(ldpc_encode(u, code), code)

    def test_unknown_rate_rejected(self):
        with pytest.raises(ValueError):
            shipped_code("3/4")
