import dataclasses

import numpy as np
import pytest

from faultfusion.data import (
    ACOUSTIC,
    PAIRED,
    VIB_ONLY,
    Manifest,
    Recording,
    SynthSpec,
    VIBRATION,
    build_dataset,
    default_class_names,
    load_recording,
    normalize_window,
    read_manifest,
    segment,
    synth_dataset,
    synth_recording,
    write_manifest,
)
from faultfusion.errors import ConfigError, DataError
from faultfusion.tensor import Rng


class TestLoadRecording:
    def test_csv_three_values(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1.0\n2.0\n3.0\n")
        rec = load_recording(p, "csv")
        assert np.array_equal(rec.samples, [1.0, 2.0, 3.0])

    def test_csv_header_skipped(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("amplitude\n1.5\n-2.5\n")
        rec = load_recording(p, "csv")
        assert np.array_equal(rec.samples, [1.5, -2.5])

    def test_csv_unparseable_line_reports_number(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1.0\n2.0\nbogus\n4.0\n")
        with pytest.raises(DataError, match="line 3"):
            load_recording(p, "csv")

    def test_empty_file(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_recording(p, "csv")

    def test_nan_rejected(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1.0\nnan\n")
        with pytest.raises(DataError, match="non-finite"):
            load_recording(p, "csv")

    def test_raw_f32le_twelve_bytes(self, tmp_path):
        p = tmp_path / "r.f32"
        p.write_bytes(np.array([0.5, -1.5, 2.0], dtype="<f4").tobytes())
        rec = load_recording(p, "raw_f32le")
        assert rec.samples.shape == (3,)
        assert np.array_equal(rec.samples, [0.5, -1.5, 2.0])

    def test_raw_partial_value(self, tmp_path):
        p = tmp_path / "r.f32"
        p.write_bytes(b"\x00" * 10)
        with pytest.raises(DataError, match="float32"):
            load_recording(p, "raw_f32le")

    def test_unknown_format(self, tmp_path):
        p = tmp_path / "r.dat"
        p.write_text("1")
        with pytest.raises(DataError, match="format"):
            load_recording(p, "mat")


class TestSegment:
    def test_table_arithmetic_420k_samples(self):
        rec = Recording(samples=np.zeros(420_000))
        assert segment(rec, 1000, 1000).shape == (420, 1000, 1)

    def test_exactly_one_window(self):
        rec = Recording(samples=np.arange(1000.0))
        out = segment(rec, 1000, 1000)
        assert out.shape == (1, 1000, 1)

    def test_remainder_dropped(self):
        rec = Recording(samples=np.zeros(1999))
        assert segment(rec, 1000, 1000).shape[0] == 1

    def test_too_short(self):
        rec = Recording(samples=np.zeros(999), source_id="short")
        with pytest.raises(DataError, match="short"):
            segment(rec, 1000, 1000)

    def test_concatenation_reconstructs_prefix(self):
        samples = Rng(0).normal(4321)
        rec = Recording(samples=samples)
        wins = segment(rec, 100, 100)
        rebuilt = wins[:, :, 0].reshape(-1)
        assert np.array_equal(rebuilt, samples[: 43 * 100])

    def test_overlapping_hop(self):
        rec = Recording(samples=np.arange(300.0))
        wins = segment(rec, 100, 50)
        assert wins.shape[0] == 5
        assert np.array_equal(wins[1, :, 0], np.arange(50.0, 150.0))


class TestNormalize:
    def test_constant_window_is_zeroed(self):
        assert not normalize_window(np.full((100, 1), 7.0)).any()

    def test_zero_mean_unit_std(self):
        w = Rng(1).normal((1000, 1))
        z = normalize_window(w)
        assert abs(z.mean()) < 1e-9
        assert abs(z.std() - 1.0) < 1e-6

    def test_positive_scale_invariance(self):
        w = Rng(2).normal((500, 1))
        assert np.abs(normalize_window(3.7 * w) - normalize_window(w)).max() < 1e-9

    def test_idempotent(self):
        w = Rng(3).normal((500, 1))
        z = normalize_window(w)
        assert np.abs(normalize_window(z) - z).max() < 1e-9

    def test_batch_normalizes_per_window(self):
        batch = np.stack([np.full((50, 1), 5.0), Rng(4).normal((50, 1))])
        z = normalize_window(batch)
        assert not z[0].any()
        assert abs(z[1].mean()) < 1e-9


def _write_pair(tmp_path, class_name, pair_key, n=350, seed=0):
    """One csv vibration file and one raw acoustic file with shared length."""
    rng = Rng(seed)
    vib = rng.normal(n)
    ac = rng.normal(n)
    vp = tmp_path / f"{pair_key}_vib.csv"
    vp.write_text("".join(f"{float(v)!r}\n" for v in vib))
    ap = tmp_path / f"{pair_key}_ac.f32"
    ap.write_bytes(ac.astype("<f4").tobytes())
    return [
        {"file_path": vp.name, "modality": VIBRATION, "label_name": class_name, "pair_key": pair_key},
        {"file_path": ap.name, "modality": ACOUSTIC, "label_name": class_name, "pair_key": pair_key},
    ]


class TestManifest:
    def test_write_read_roundtrip(self, tmp_path):
        rows = _write_pair(tmp_path, "healthy", "p0") + _write_pair(tmp_path, "faulty", "p1", seed=1)
        path = tmp_path / "manifest.csv"
        write_manifest(Manifest(rows=rows, class_names=["healthy", "faulty"]), path)
        m = read_manifest(path)
        assert m.class_names == ["healthy", "faulty"]  # first-appearance order
        assert len(m.rows) == 4
        assert m.base_dir == str(tmp_path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text("path,kind\nx,y\n")
        with pytest.raises(DataError, match="header"):
            read_manifest(path)

    def test_bad_modality(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text("file_path,modality,label_name,pair_key\nf.csv,thermal,a,p0\n")
        with pytest.raises(DataError, match="modality"):
            read_manifest(path)


class TestBuildDataset:
    def _manifest(self, tmp_path):
        rows = _write_pair(tmp_path, "healthy", "p0") + _write_pair(tmp_path, "faulty", "p1", seed=1)
        path = tmp_path / "manifest.csv"
        write_manifest(Manifest(rows=rows, class_names=["healthy", "faulty"]), path)
        return read_manifest(path)

    def test_paired_counts(self, tmp_path):
        ds = build_dataset(self._manifest(tmp_path), PAIRED, window_len=100)
        assert len(ds) == 6  # 2 pairs x floor(350 / 100)
        assert ds.vib.shape == (6, 100, 1) and ds.ac.shape == (6, 100, 1)
        assert sorted(ds.labels.tolist()) == [0, 0, 0, 1, 1, 1]

    def test_window_count_independent_of_mode(self, tmp_path):
        m = self._manifest(tmp_path)
        assert (
            len(build_dataset(m, VIB_ONLY, window_len=100))
            == len(build_dataset(m, PAIRED, window_len=100))
            == 6
        )

    def test_missing_pair_member_names_key(self, tmp_path):
        rows = _write_pair(tmp_path, "healthy", "p0")
        rows += _write_pair(tmp_path, "faulty", "p1", seed=1)[:1]  # drop acoustic of p1
        path = tmp_path / "manifest.csv"
        write_manifest(Manifest(rows=rows, class_names=["healthy", "faulty"]), path)
        with pytest.raises(DataError, match="p1"):
            build_dataset(read_manifest(path), PAIRED, window_len=100)

    def test_conflicting_pair_labels(self, tmp_path):
        rows = _write_pair(tmp_path, "healthy", "p0")
        rows[1]["label_name"] = "faulty"
        path = tmp_path / "manifest.csv"
        write_manifest(Manifest(rows=rows, class_names=["healthy", "faulty"]), path)
        with pytest.raises(DataError, match="conflicting"):
            build_dataset(read_manifest(path), PAIRED, window_len=100)

    def test_paired_windows_cover_identical_ranges(self, tmp_path):
        m = self._manifest(tmp_path)
        ds = build_dataset(m, PAIRED, window_len=100, normalize=False)
        vib_file = tmp_path / "p0_vib.csv"
        raw = np.array([float(line) for line in vib_file.read_text().splitlines()])
        assert np.array_equal(ds.vib[1, :, 0], raw[100:200])

    def test_no_rows_for_modality(self, tmp_path):
        rows = _write_pair(tmp_path, "healthy", "p0")[1:]  # acoustic only
        path = tmp_path / "manifest.csv"
        write_manifest(Manifest(rows=rows, class_names=["healthy"]), path)
        with pytest.raises(DataError, match="vibration"):
            build_dataset(read_manifest(path), VIB_ONLY, window_len=100)


class TestSynthRecording:
    def test_zero_amplitude_zero_noise_is_silent(self):
        spec = SynthSpec(windows_per_class=2, impulse_amplitude=0.0,
                         vib_noise_sigma=0.0, ac_noise_sigma=0.0)
        rec = synth_recording(0, spec, Rng(0), VIBRATION)
        assert not rec.samples.any()

    def test_same_seed_identical(self):
        spec = SynthSpec(windows_per_class=3)
        a = synth_recording(2, spec, Rng(5), ACOUSTIC)
        b = synth_recording(2, spec, Rng(5), ACOUSTIC)
        assert np.array_equal(a.samples, b.samples)

    def test_bad_class(self):
        with pytest.raises(DataError, match="class_id"):
            synth_recording(9, SynthSpec(), Rng(0), VIBRATION)

    def test_first_burst_jittered_before_sample_zero(self):
        # seed 558 draws a phase + jitter whose first impulse starts at a
        # negative sample; the burst must be truncated, not wrapped
        spec = SynthSpec(num_classes=2, windows_per_class=2, window_len=500)
        rec = synth_recording(0, spec, Rng(558), VIBRATION)
        assert rec.samples.shape == (1000,)
        assert np.isfinite(rec.samples).all()

    @pytest.mark.parametrize("class_id", [0, 2])
    def test_burst_count_matches_repetition_rate(self, class_id):
        # one second of clean signal; bursts counted by threshold crossings
        # separated by a quiet gap (independent of the generator internals)
        spec = SynthSpec(windows_per_class=42, vib_noise_sigma=0.0,
                         ac_noise_sigma=0.0, decay_s=0.001)
        rec = synth_recording(class_id, spec, Rng(7), VIBRATION)
        x = np.abs(rec.samples)
        threshold = 0.4 * x.max()
        above = np.flatnonzero(x > threshold)
        gap = int(0.003 * spec.sample_rate_hz)  # 3 ms of silence ends a burst
        bursts = 1 + int((np.diff(above) > gap).sum())
        expected = spec.repetition_hz(class_id)
        assert abs(bursts - expected) <= 1


class TestSynthDataset:
    def test_counts_and_balance(self):
        spec = SynthSpec(num_classes=3, windows_per_class=4, window_len=500)
        ds = synth_dataset(spec)
        assert len(ds) == 12
        assert ds.mode == PAIRED
        for c in range(3):
            assert (ds.labels == c).sum() == 4

    def test_bit_identical_across_calls(self):
        spec = SynthSpec(num_classes=2, windows_per_class=3, window_len=500)
        a, b = synth_dataset(spec), synth_dataset(spec)
        assert np.array_equal(a.vib, b.vib)
        assert np.array_equal(a.ac, b.ac)

    def test_different_seeds_differ(self):
        a = synth_dataset(SynthSpec(num_classes=2, windows_per_class=2, window_len=500, seed=0))
        b = synth_dataset(SynthSpec(num_classes=2, windows_per_class=2, window_len=500, seed=1))
        assert (a.vib != b.vib).any()

    def test_vibration_snr_exceeds_acoustic_snr(self):
        spec = SynthSpec(num_classes=2, windows_per_class=10)
        clean = dataclasses.replace(spec, vib_noise_sigma=0.0, ac_noise_sigma=0.0)
        root_a, root_b = Rng(spec.seed), Rng(spec.seed)
        snr = {}
        for modality, tag in ((VIBRATION, 0), (ACOUSTIC, 1)):
            noisy = synth_recording(0, spec, root_a.derive(tag), modality).samples
            signal = synth_recording(0, clean, root_b.derive(tag), modality).samples
            noise = noisy - signal
            snr[modality] = signal.var() / noise.var()
        assert snr[VIBRATION] > snr[ACOUSTIC]

    def test_default_sigma_relation(self):
        spec = SynthSpec()
        assert spec.ac_noise_sigma == 2 * spec.vib_noise_sigma

    def test_class_name_defaults(self):
        assert default_class_names(9)[0] == "Healthy"
        assert default_class_names(8) == [f"Class {i}" for i in range(1, 9)]
        assert len(SynthSpec(num_classes=8).class_names) == 8


class TestSynthSpecValidation:
    def test_zero_classes(self):
        with pytest.raises(ConfigError):
            SynthSpec(num_classes=0)

    def test_zero_repetition_step(self):
        with pytest.raises(ConfigError, match="distinct"):
            SynthSpec(repetition_step_hz=0.0)

    def test_negative_sigma(self):
        with pytest.raises(ConfigError, match="sigma"):
            SynthSpec(vib_noise_sigma=-1.0)
