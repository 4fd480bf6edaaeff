"""
Acceptance suites

Synthetic-signal suites with known ground truth, the imputation workflow,
and two gated suites:

    LIBRISPEECH_DIR=/data/LibriSpeech/dev-clean   reference spot check
    AUDIO_FEATURES_BENCHMARK=1                    1000-file parallel run

Run with: pytest -m slow
"""

import os
import shutil
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from audio_core import Waveform
from clinical_features import dfa, extract_periods, formants, hnr, jitters, shimmers
from feature_config import config_from_names, default_config
from pipeline import FeatureMatrix, extract_directory, extract_file, impute_column_means, scan_audio_files, write_csv
from prosody_features import crest_factor, f0_statistics, track_f0, zero_crossings
from reference_check import LIBRISPEECH_REFERENCE, ReferenceVerifier
from spectral_features import spectral_descriptors, stft_magnitude
from tests.signals import SR, jittered_train, random_walk, sine, sine_wave, synthetic_vowel, white_noise, write_wav
from tests.test_clinical_features import _direct_jitter, _direct_shimmer

LIBRISPEECH_ENV = "LIBRISPEECH_DIR"
BENCHMARK_ENV = "AUDIO_FEATURES_BENCHMARK"
TONE_DURATION = 2.0


@pytest.mark.slow
class TestSyntheticTones:
    """Pure tones through every classical measure"""

    @pytest.mark.parametrize("freq", [80.0, 120.0, 220.0, 330.0, 440.0])
    def test_tone(self, freq):
        w = sine_wave(freq, TONE_DURATION)
        contour = track_f0(w)

        assert f0_statistics(contour).mean == pytest.approx(freq, abs=2.0)
        assert jitters(extract_periods(w, contour)).local < 0.005
        assert hnr(w, contour) >= 30.0

        centroid = spectral_descriptors(stft_magnitude(w))["centroid"].values
        assert np.mean(centroid) == pytest.approx(freq, abs=SR / 512)

        assert np.mean(crest_factor(w).values) == pytest.approx(np.sqrt(2.0), rel=0.01)
        assert abs(zero_crossings(w).count - 2 * freq * TONE_DURATION) <= 2


@pytest.mark.slow
class TestPerturbationOracle:
    """Pipeline jitter and shimmer against the definitions on known periods"""

    JITTER_LEVELS = (0.005, 0.01, 0.02)
    SHIMMER_LEVELS = (0.01, 0.05)

    @pytest.mark.parametrize("seed", range(100))
    def test_pulse_train(self, seed):
        rng = np.random.default_rng(1000 + seed)
        jitter_level = self.JITTER_LEVELS[seed % 3]
        shimmer_level = self.SHIMMER_LEVELS[(seed // 3) % 2]
        f0 = float(rng.uniform(100.0, 200.0))

        x, periods, amplitudes = jittered_train(f0, 200, jitter_level, shimmer_level, seed=seed)
        w = Waveform.from_array(x, SR)
        p = extract_periods(w, track_f0(w))

        measured_jitter = jitters(p)
        measured_shimmer = shimmers(p)
        true_jitter = _direct_jitter(list(periods))
        true_shimmer = _direct_shimmer(list(amplitudes[:-1]))

        for name in ("local", "local_absolute", "rap", "ppq5", "ddp"):
            assert getattr(measured_jitter, name) == pytest.approx(true_jitter[name], rel=0.15), name
        for name in ("local", "local_db", "apq3"):
            assert getattr(measured_shimmer, name) == pytest.approx(true_shimmer[name], rel=0.15), name
        assert abs(measured_jitter.ddp - 3.0 * measured_jitter.rap) < 1e-12


@pytest.mark.slow
class TestDfaScaling:
    """Scaling exponents of white and integrated noise"""

    SEEDS = range(20)
    LENGTH = 2 ** 14

    def test_white_noise(self):
        alphas = [dfa(Waveform.from_array(white_noise(self.LENGTH, seed), SR)) for seed in self.SEEDS]
        assert 0.4 <= np.mean(alphas) <= 0.6

    def test_integrated_noise(self):
        alphas = [dfa(Waveform.from_array(random_walk(self.LENGTH, seed), SR)) for seed in self.SEEDS]
        assert 1.4 <= np.mean(alphas) <= 1.6


@pytest.mark.slow
class TestFormantRecovery:
    """All-pole vowels with resonances at 700, 1220 and 2600 Hz"""

    @pytest.mark.parametrize("f0", [100.0, 150.0, 200.0])
    def test_vowel(self, f0):
        found = formants(Waveform.from_array(synthetic_vowel(f0), SR))

        assert found.f1 == pytest.approx(700.0, abs=50.0)
        assert found.f2 == pytest.approx(1220.0, abs=50.0)
        assert found.f3 == pytest.approx(2600.0, abs=50.0)


@pytest.mark.integration
class TestImputationWorkflow:
    """Silent files lose their F0-derived cells; imputation restores column means"""

    def setup_method(self):
        self.test_dir = Path(tempfile.mkdtemp())
        for index, freq in enumerate((110.0, 150.0, 190.0, 230.0)):
            write_wav(self.test_dir / f"tone{index}.wav", sine(freq, 1.0))
        write_wav(self.test_dir / "silent0.wav", np.zeros(SR))
        write_wav(self.test_dir / "silent1.wav", np.zeros(SR))

    def teardown_method(self):
        shutil.rmtree(self.test_dir)

    def test_impute(self):
        config = config_from_names(["f0_statistics", "rms"], statistics=["mean"])
        matrix = extract_directory(self.test_dir, config)

        f0 = matrix.column("f0_statistics.mean")
        silent = [matrix.row_ids.index(r) for r in ("silent0.wav", "silent1.wav")]
        tones = [i for i in range(len(matrix.row_ids)) if i not in silent]
        assert np.all(np.isnan(f0[silent]))
        assert np.all(np.isfinite(f0[tones]))

        imputed = impute_column_means(matrix)
        expected = sum(f0[i] for i in tones) / len(tones)
        np.testing.assert_allclose(imputed.column("f0_statistics.mean")[silent], expected, rtol=1e-12)
        np.testing.assert_array_equal(imputed.column("rms.mean"), matrix.column("rms.mean"))
        np.testing.assert_array_equal(impute_column_means(imputed).cells, imputed.cells)


@pytest.mark.slow
@pytest.mark.skipif(not os.getenv(LIBRISPEECH_ENV), reason=f"set {LIBRISPEECH_ENV} to a LibriSpeech subset")
class TestLibriSpeechReference:
    """Corpus means against published LibriSpeech values, one SD tolerance"""

    COLUMNS = {
        "f0_statistics.mean", "f0_statistics.sd", "jitters.local", "shimmers.local", "hnr",
        "loudness.integrated", "rms.mean", "spectral_centroid.mean", "dfa",
    }

    def test_spot_check(self):
        files = scan_audio_files(os.environ[LIBRISPEECH_ENV])[:100]
        assert len(files) >= 100, "need at least 100 files"

        config = config_from_names(
            ["f0_statistics", "jitters", "shimmers", "hnr", "loudness", "rms", "spectral_centroid", "dfa"],
            statistics=["mean"], sample_rate=SR,
        )
        rows = [extract_file(path, config, row_id) for path, row_id in files]
        matrix = FeatureMatrix(
            row_ids=[row_id for _, row_id in files],
            column_names=config.column_names(),
            cells=[[row[c] for c in config.column_names()] for row in rows],
        )

        verifier = ReferenceVerifier([r for r in LIBRISPEECH_REFERENCE if r.column in self.COLUMNS])
        verification = verifier.verify_matrix(matrix)
        assert verification.passed, verifier.format_verification_report(verification)


@pytest.mark.slow
@pytest.mark.skipif(os.getenv(BENCHMARK_ENV) != "1", reason=f"set {BENCHMARK_ENV}=1 to run")
class TestParallelBenchmark:
    """1000 synthetic files: identical CSVs and a parallel speedup"""

    def setup_method(self):
        self.test_dir = Path(tempfile.mkdtemp())
        rng = np.random.default_rng(0)
        for index in range(1000):
            tone = sine(float(rng.uniform(90.0, 250.0)), 0.5) + white_noise(SR // 2, seed=index, scale=0.01)
            write_wav(self.test_dir / "corpus" / f"{index // 100:02d}" / f"{index:04d}.wav", np.clip(tone, -1.0, 1.0))

    def teardown_method(self):
        shutil.rmtree(self.test_dir)

    def test_determinism_and_speedup(self):
        config = default_config()
        timings = {}
        for jobs in (1, 8):
            start = time.perf_counter()
            matrix = extract_directory(self.test_dir / "corpus", config, n_jobs=jobs)
            timings[jobs] = time.perf_counter() - start
            write_csv(matrix, self.test_dir / f"jobs{jobs}.csv")

        assert (self.test_dir / "jobs1.csv").read_bytes() == (self.test_dir / "jobs8.csv").read_bytes()
        if (os.cpu_count() or 1) >= 8:
            assert timings[1] / timings[8] > 3.0
