import numpy as np
import pytest

from dsmppi.correlation import (build_correlation, colored_noise_correlation,
                                kronecker, matrix_sqrt)


class TestColoredNoise:
    def test_white_noise_is_identity(self):
        for h in (1, 5, 30):
            c = colored_noise_correlation(h, 0.0)
            np.testing.assert_allclose(c, np.eye(h), atol=1e-13)

    def test_pink_noise_structure(self):
        c = colored_noise_correlation(30, 1.0)
        assert np.allclose(c, c.T)
        np.testing.assert_allclose(np.diag(c), 1.0, atol=1e-12)
        assert c[0, 1] > 0.0  # positive lag-1 correlation
        assert np.linalg.eigvalsh(c).min() >= -1e-10

    def test_matches_independent_fft_oracle(self):
        # Rebuild the lag sequence through the full complex FFT with an
        # explicitly mirrored spectrum instead of irfft.
        h, beta = 16, 1.0
        n = 2 * h
        freqs = np.fft.rfftfreq(n)
        psd_half = np.empty(h + 1)
        psd_half[1:] = freqs[1:] ** (-beta)
        psd_half[0] = psd_half[1]
        full = np.concatenate([psd_half, psd_half[-2:0:-1]])
        r = np.real(np.fft.ifft(full))[:h]
        r /= r[0]
        c = colored_noise_correlation(h, beta)
        np.testing.assert_allclose(c[0], r, atol=1e-12)

    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 2.0])
    def test_toeplitz_symmetric_psd(self, beta):
        h = 12
        c = colored_noise_correlation(h, beta)
        for i in range(h):
            for j in range(h):
                assert c[i, j] == pytest.approx(c[abs(i - j), 0], abs=1e-14)
        eig = np.linalg.eigvalsh(c)
        assert eig.min() >= -1e-10
        assert np.clip(eig, 0.0, None).min() >= 0.0

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            colored_noise_correlation(0, 1.0)
        with pytest.raises(ValueError):
            colored_noise_correlation(5, -0.5)


class TestKronecker:
    def test_entrywise_oracle_2x2(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[0.5, -1.0], [2.0, 0.0]])
        k = kronecker(a, b)
        assert k.shape == (4, 4)
        for i in range(4):
            for j in range(4):
                assert k[i, j] == pytest.approx(a[i // 2, j // 2] * b[i % 2, j % 2])

    def test_identity_times_identity(self):
        assert np.array_equal(kronecker(np.eye(3), np.eye(2)), np.eye(6))

    def test_identity_spatial_block_structure(self):
        c_temp = colored_noise_correlation(4, 1.0)
        k = kronecker(c_temp, np.eye(2))
        for i in range(4):
            for j in range(4):
                block = k[2 * i:2 * i + 2, 2 * j:2 * j + 2]
                np.testing.assert_allclose(block, c_temp[i, j] * np.eye(2), atol=1e-15)

    def test_mixed_product_property(self):
        rng = np.random.default_rng(7)
        a, b, c, d = (rng.normal(size=(3, 3)) for _ in range(4))
        left = kronecker(a, b) @ kronecker(c, d)
        right = kronecker(a @ c, b @ d)
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            kronecker(np.ones((2, 3)), np.eye(2))


class TestMatrixSqrt:
    def test_identity(self):
        np.testing.assert_allclose(matrix_sqrt(np.eye(4)), np.eye(4), atol=1e-14)

    def test_diagonal(self):
        np.testing.assert_allclose(matrix_sqrt(np.diag([4.0, 9.0])),
                                   np.diag([2.0, 3.0]), atol=1e-14)

    def test_reconstruction_random_spd(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            b = rng.normal(size=(6, 6))
            c = b @ b.T + 1e-3 * np.eye(6)
            a = matrix_sqrt(c)
            assert np.max(np.abs(a @ a.T - c)) <= 1e-8

    def test_rejects_asymmetric(self):
        c = np.eye(3)
        c[0, 1] = 1e-3
        with pytest.raises(ValueError, match="asymmetric"):
            matrix_sqrt(c)

    def test_rejects_indefinite_reporting_eigenvalue(self):
        with pytest.raises(ValueError, match="-1"):
            matrix_sqrt(np.diag([1.0, -1.0]))


class TestBuildCorrelation:
    @pytest.mark.parametrize("h,d_u", [(30, 1), (15, 2)])
    def test_sqrt_reconstruction(self, h, d_u):
        s = build_correlation(h, d_u, 1.0)
        assert np.max(np.abs(s.a_rho @ s.a_rho.T - s.c_rho)) <= 1e-8

    def test_kron_structure_small(self):
        s = build_correlation(3, 2, 1.0)
        np.testing.assert_allclose(s.c_rho, np.kron(s.c_temp, np.eye(2)), atol=1e-14)

    def test_cached_and_immutable(self):
        s1 = build_correlation(8, 1, 1.0)
        s2 = build_correlation(8, 1, 1.0)
        assert s1 is s2
        with pytest.raises(ValueError):
            s1.a_rho[0, 0] = 2.0

    def test_c_temp_csv_dump(self, tmp_path):
        from dsmppi.correlation import dump_c_temp_csv
        s = build_correlation(5, 1, 1.0)
        path = tmp_path / "c_temp.csv"
        dump_c_temp_csv(s, path)
        np.testing.assert_allclose(np.loadtxt(path, delimiter=","), s.c_temp)
