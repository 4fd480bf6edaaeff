"""
Tests for pipeline.py

Directory runs, per-component failure isolation, events, imputation and
the CSV format.
"""

import json
import logging
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from audio_core import Waveform
from feature_config import config_from_names
from feature_errors import NoAudioFound
from pipeline import (
    EVENT_LOGGER_NAME,
    FeatureEvent,
    FeatureMatrix,
    compute_row,
    extract_directory,
    extract_features,
    extract_file,
    impute_column_means,
    read_csv,
    scan_audio_files,
    write_csv,
)
from series_store import SeriesStore
from tests.signals import SR, sine, sine_wave, white_noise, write_wav


def _events(caplog):
    return [json.loads(r.getMessage()) for r in caplog.records if r.name == EVENT_LOGGER_NAME]


class TestDirectoryExtraction:
    """Test extraction over a directory tree"""

    def setup_method(self):
        self.test_dir = Path(tempfile.mkdtemp())
        self.audio_dir = self.test_dir / "audio"
        write_wav(self.audio_dir / "c.wav", sine(330.0, 1.0))
        write_wav(self.audio_dir / "a.wav", sine(220.0, 1.0))
        write_wav(self.audio_dir / "sub" / "b.flac", white_noise(SR, seed=1))
        (self.audio_dir / "notes.txt").write_text("not audio")
        self.config = config_from_names(["rms", "zero_crossings"], statistics=["mean"])

    def teardown_method(self):
        shutil.rmtree(self.test_dir)

    def test_scan_sorted_by_relative_path(self):
        write_wav(self.audio_dir / "D.WAV", sine(100.0, 0.5))
        ids = [row_id for _, row_id in scan_audio_files(self.audio_dir)]
        assert ids == ["D.WAV", "a.wav", "c.wav", "sub/b.flac"]

    def test_rows_and_columns(self):
        matrix = extract_directory(self.audio_dir, self.config)

        assert matrix.row_ids == ["a.wav", "c.wav", "sub/b.flac"]
        assert matrix.column_names == ["rms.mean", "zero_crossings.rate", "zero_crossings.count"]
        assert matrix.shape == (3, 3)
        assert matrix.missing_count() == 0
        assert matrix.row("a.wav")["rms.mean"] == pytest.approx(0.5 / np.sqrt(2.0), rel=0.01)

    def test_worker_count_does_not_change_result(self):
        serial = extract_directory(self.audio_dir, self.config, n_jobs=1)
        parallel = extract_directory(self.audio_dir, self.config, n_jobs=2)

        assert serial.row_ids == parallel.row_ids
        np.testing.assert_array_equal(serial.cells, parallel.cells)

        write_csv(serial, self.test_dir / "serial.csv")
        write_csv(parallel, self.test_dir / "parallel.csv")
        assert (self.test_dir / "serial.csv").read_bytes() == (self.test_dir / "parallel.csv").read_bytes()

    def test_corrupt_file_gives_missing_row(self, caplog):
        clean = extract_directory(self.audio_dir, self.config)
        (self.audio_dir / "broken.wav").write_bytes(b"RIFF\x00\x00garbage")

        with caplog.at_level(logging.WARNING, logger=EVENT_LOGGER_NAME):
            matrix = extract_directory(self.audio_dir, self.config)

        assert matrix.row_ids == ["a.wav", "broken.wav", "c.wav", "sub/b.flac"]
        assert np.all(np.isnan(matrix.cells[1]))
        for row_id in clean.row_ids:
            np.testing.assert_array_equal(matrix.cells[matrix.row_ids.index(row_id)],
                                          clean.cells[clean.row_ids.index(row_id)])

        events = _events(caplog)
        assert len(events) == 1
        assert events[0]["file"] == "broken.wav"
        assert events[0]["kind"] == "DecodeFailure"

    def test_no_audio(self):
        empty = self.test_dir / "empty"
        empty.mkdir()
        (empty / "readme.md").write_text("nothing")

        with pytest.raises(NoAudioFound):
            extract_directory(empty, self.config)

    def test_missing_directory(self):
        with pytest.raises(FileNotFoundError):
            extract_directory(self.test_dir / "absent", self.config)

    def test_resample_target(self):
        write_wav(self.test_dir / "hi" / "tone.wav", sine(440.0, 1.0, sr=44100), sr=44100)
        config = config_from_names(["zero_crossings"], sample_rate=SR)

        matrix = extract_directory(self.test_dir / "hi", config)
        assert matrix.row("tone.wav")["zero_crossings.count"] == pytest.approx(880, abs=3)

    def test_passthrough_stores_series(self):
        store = SeriesStore(storage_dir=str(self.test_dir / "series"))
        config = config_from_names(["rms", "dfa"], statistics=[])

        matrix = extract_directory(self.audio_dir, config, series_store=store)

        assert matrix.column_names == ["dfa"]
        assert store.list_series(component="rms") == ["a.wav.rms", "c.wav.rms", "sub__b.flac.rms"]
        assert store.load_series("a.wav.rms").values.ndim == 1

    def test_extract_file(self):
        row = extract_file(self.audio_dir / "a.wav", self.config)

        assert list(row) == self.config.column_names()
        assert row["zero_crossings.count"] == pytest.approx(440, abs=2)


class TestComponentFailures:
    """Test that one failing component only blanks its own cells"""

    def test_silence(self, caplog):
        config = config_from_names(["f0_statistics", "amplitude_entropy", "rms"], statistics=["mean"])

        with caplog.at_level(logging.WARNING, logger=EVENT_LOGGER_NAME):
            frame = extract_features([Waveform.from_array(np.zeros(SR), SR)],
                                     ["f0_statistics", "amplitude_entropy", "rms"], ["mean"])

        row = frame.iloc[0]
        assert np.isnan(row["f0_statistics.mean"]) and np.isnan(row["f0_statistics.sd"])
        assert np.isnan(row["amplitude_entropy"])
        assert row["rms.mean"] == 0.0
        assert list(frame.columns) == config.column_names()

        kinds = {e["component"]: e["kind"] for e in _events(caplog)}
        assert kinds == {"f0_statistics": "NoVoicedFrames", "amplitude_entropy": "DegenerateSignal"}

    def test_compute_row_events(self):
        config = config_from_names(["jitters", "rms"], statistics=["max"])
        row = compute_row(Waveform.from_array(np.zeros(SR), SR), config, "quiet.wav")

        assert len(row.values) == 6
        assert all(np.isnan(v) for v in row.values[:5])
        assert row.values[5] == 0.0
        assert row.events[0].component == "jitters"
        assert row.events[0].kind == "InsufficientVoicing"

    def test_missing_frames_are_not_events(self):
        config = config_from_names(["f0_contour"], statistics=["mean"])
        x = np.concatenate([np.zeros(SR // 2), sine(200.0, 0.5)])
        row = compute_row(Waveform.from_array(x, SR), config, "half.wav")

        assert row.events == []
        assert row.values[0] == pytest.approx(200.0, abs=3.0)

    def test_event_json(self):
        event = FeatureEvent(file="a.wav", component="hnr", kind="NoVoicedFrames", message="none")
        assert json.loads(event.to_json()) == {
            "file": "a.wav", "component": "hnr", "kind": "NoVoicedFrames", "message": "none",
        }


class TestExtractFeatures:
    """Test the in-memory helper"""

    def test_dataframe(self):
        frame = extract_features([sine_wave(220.0), sine_wave(440.0)], ["zero_crossings"], row_ids=["low", "high"])

        assert frame.index.name == "file"
        assert list(frame.index) == ["low", "high"]
        assert frame.loc["high", "zero_crossings.count"] > frame.loc["low", "zero_crossings.count"]

    def test_default_row_ids_and_paths(self, tmp_path):
        path = write_wav(tmp_path / "t.wav", sine(220.0))
        frame = extract_features([path], ["rms"], ["mean"])
        assert list(frame.index) == ["0"]


class TestImputation:
    """Test column-mean imputation"""

    def _matrix(self, cells):
        cells = np.asarray(cells, dtype=np.float64)
        return FeatureMatrix(
            row_ids=[f"r{i}" for i in range(cells.shape[0])],
            column_names=[f"c{j}" for j in range(cells.shape[1])],
            cells=cells,
        )

    def test_column_mean(self):
        imputed = impute_column_means(self._matrix([[1.0, 5.0], [np.nan, 5.0], [3.0, 5.0]]))
        np.testing.assert_array_equal(imputed.column("c0"), [1.0, 2.0, 3.0])

    def test_idempotent(self):
        once = impute_column_means(self._matrix([[1.0, np.nan], [np.nan, 4.0], [2.0, 8.0]]))
        twice = impute_column_means(once)
        np.testing.assert_array_equal(once.cells, twice.cells)

    def test_all_missing_column(self, caplog):
        with caplog.at_level(logging.WARNING):
            imputed = impute_column_means(self._matrix([[1.0, np.nan], [2.0, np.nan]]))

        np.testing.assert_array_equal(imputed.column("c1"), [0.0, 0.0])
        assert "c1" in caplog.text

    def test_input_not_modified(self):
        original = self._matrix([[np.nan], [1.0]])
        impute_column_means(original)
        assert np.isnan(original.cells[0, 0])


class TestCsv:
    """Test the CSV writer and reader"""

    def setup_method(self):
        self.test_dir = tempfile.mkdtemp()
        self.path = Path(self.test_dir) / "features.csv"

    def teardown_method(self):
        shutil.rmtree(self.test_dir)

    def test_format(self):
        matrix = FeatureMatrix(row_ids=["a.wav"], column_names=["x", "y,z"], cells=[[0.1, np.nan]])
        write_csv(matrix, self.path)

        data = self.path.read_bytes()
        assert data == b'file,x,"y,z"\r\na.wav,0.10000000000000001,\r\n'

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        cells = rng.normal(size=(3, 4)) * 10.0 ** rng.integers(-8, 8, size=(3, 4))
        cells[1, 2] = np.nan
        matrix = FeatureMatrix(row_ids=["a", "b/c.wav", "d"], column_names=["p", "q", "r", "s"], cells=cells)

        write_csv(matrix, self.path)
        loaded = read_csv(self.path)

        assert loaded.row_ids == matrix.row_ids
        assert loaded.column_names == matrix.column_names
        np.testing.assert_array_equal(loaded.cells, matrix.cells)

    def test_numeric_looking_row_ids_stay_text(self):
        write_csv(FeatureMatrix(row_ids=["001"], column_names=["x"], cells=[[1.0]]), self.path)
        assert read_csv(self.path).row_ids == ["001"]

    def test_missing_id_column(self):
        self.path.write_text("x,y\r\n1,2\r\n")
        with pytest.raises(ValueError):
            read_csv(self.path)
