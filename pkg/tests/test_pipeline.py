"""End-to-end checks on the per-bed chain and the run drivers."""

import io

import numpy as np
import pytest

from vitalwatch.board import BoardState
from vitalwatch.config import BedSource, Settings
from vitalwatch.engine import Verdict, VerdictKind
from vitalwatch.pipeline import (
    BedPipeline,
    build_source,
    monitor_run,
    replay_run,
    standardized_stream,
)
from vitalwatch.sources import ReplaySource, SocketSource, SourceError, TailSource
from vitalwatch.synth import default_spec, write_stream
from vitalwatch.validity import DataWarning


PW = "PW123"


def small_settings(**overrides) -> Settings:
    base = dict(
        password=PW,
        schema_names=("hr", "spo2", "nbp_sys"),
        warmup=4,
        train_steps=6,
        warn_threshold=3,
        nu1=0.07,
        nu2=0.16,
        sigma=1.5,
        ell=5,
    )
    base.update(overrides)
    return Settings(**base)


def wire(*values) -> str:
    return ",".join([PW, *[str(v) for v in values]])


def steady_line(rng) -> str:
    return wire(*(f"{v:.3f}" for v in 70.0 + rng.standard_normal(3)))


class TestBedPipeline:
    def test_phases_advance_at_exact_frame_counts(self):
        pipe = BedPipeline("bed1", small_settings())
        rng = np.random.default_rng(0)
        assert pipe.phase == "warmup"
        for i in range(4):
            assert pipe.feed_line(steady_line(rng), float(i)) == []
        assert pipe.phase == "training"
        for i in range(6):
            assert pipe.feed_line(steady_line(rng), float(i)) == []
        assert pipe.phase == "live"
        events = pipe.feed_line(steady_line(rng), 10.0)
        assert len(events) == 1
        assert isinstance(events[0], Verdict)
        assert events[0].at_timestep == 10

    def test_flagged_frames_keep_their_timestep_slot(self):
        pipe = BedPipeline("bed1", small_settings())
        rng = np.random.default_rng(1)
        for i in range(12):
            pipe.feed_line(steady_line(rng), float(i))
        # two bad frames occupy timesteps 12 and 13
        assert pipe.feed_line("garbage", 12.0) == []
        assert pipe.feed_line(wire("72", "-", "118"), 13.0) == []
        events = pipe.feed_line(steady_line(rng), 14.0)
        assert [e.at_timestep for e in events] == [14]

    def test_spike_during_live_raises_red(self):
        pipe = BedPipeline("bed1", small_settings(warmup=10, train_steps=20))
        rng = np.random.default_rng(2)
        for i in range(60):
            pipe.feed_line(steady_line(rng), float(i))
        assert pipe.phase == "live"
        events = pipe.feed_line(wire("300", "5", "400"), 60.0)
        verdicts = [e for e in events if isinstance(e, Verdict)]
        assert verdicts[0].kind in (VerdictKind.RED1, VerdictKind.ORANGE)
        assert verdicts[0].delta > 0.16

    def test_warning_raised_and_cleared_through_the_chain(self):
        pipe = BedPipeline("bed1", small_settings())
        rng = np.random.default_rng(3)
        for i in range(3):
            pipe.feed_line(steady_line(rng), float(i))
        assert pipe.feed_line("x", 3.0) == []
        assert pipe.feed_line("x", 4.0) == []
        events = pipe.feed_line("x", 5.0)
        assert events == [DataWarning(active=True, at_timestep=5)]
        events = pipe.feed_line(steady_line(rng), 6.0)
        assert DataWarning(active=False, at_timestep=6) in events

    def test_frame_archive_gets_every_frame_including_flagged(self):
        sink = io.StringIO()
        pipe = BedPipeline("bed1", small_settings(), frame_archive=sink)
        rng = np.random.default_rng(4)
        pipe.feed_line(steady_line(rng), 1.0)
        pipe.feed_line(wire("72", "-", "118"), 2.0)
        rows = sink.getvalue().splitlines()
        assert rows[0] == "bed,timestep,received_at,flags,hr,spo2,nbp_sys"
        assert len(rows) == 3
        assert rows[2].startswith("bed1,1,2.000,1:hyphen,")


class TestStandardizedStream:
    def test_timesteps_skip_flagged_and_warmup_frames(self):
        settings = small_settings()
        rng = np.random.default_rng(5)
        lines = [steady_line(rng) for _ in range(20)]
        lines[7] = "bogus"
        lines[8] = wire("-", "98", "118")
        timesteps, vectors = standardized_stream(lines, settings)
        # 18 valid frames, first 4 feed the standardizer only
        assert timesteps == [4, 5, 6] + list(range(9, 20))
        assert len(vectors) == len(timesteps)
        assert all(np.isfinite(v).all() for v in vectors)

    def test_vectors_use_masked_columns(self):
        settings = small_settings(schema_use=(0, 2))
        rng = np.random.default_rng(6)
        lines = [steady_line(rng) for _ in range(10)]
        _, vectors = standardized_stream(lines, settings)
        assert vectors[0].shape == (2,)


@pytest.fixture()
def capture_file(tmp_path):
    spec = default_spec(
        steps=120, n_anomalies=2, seed=5, dim=4, first_anomaly=70, min_gap=15
    )
    path = tmp_path / "stream.csv"
    write_stream(spec, path, tmp_path / "labels.csv")
    return path


def drop_column(text: str, idx: int) -> str:
    rows = []
    for row in text.splitlines():
        cells = row.split(",")
        del cells[idx]
        rows.append(",".join(cells))
    return "\n".join(rows)


class TestReplayRun:
    def test_counts_and_artifacts(self, tmp_path, capture_file):
        settings = Settings(warmup=10, train_steps=20)
        out = tmp_path / "out"
        counts = replay_run(settings, capture_file, out_dir=out, screen=io.StringIO())
        assert counts["frames"] == 120
        frames = (out / "frames_bed1.csv").read_text().splitlines()
        assert len(frames) == 121  # header + one row per frame
        assert (out / "events.csv").exists()
        # live scoring covers everything after warmup + training
        assert counts["events"] >= 120 - 30

    def test_two_runs_identical_modulo_wall_clock(self, tmp_path, capture_file):
        settings = Settings(warmup=10, train_steps=20)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            replay_run(settings, capture_file, out_dir=out)
            frames = drop_column((out / "frames_bed1.csv").read_text(), 2)
            events = drop_column((out / "events.csv").read_text(), 0)
            outs.append((frames, events))
        assert outs[0] == outs[1]

    def test_rerun_into_same_dir_replaces_archives(self, tmp_path, capture_file):
        settings = Settings(warmup=10, train_steps=20)
        out = tmp_path / "out"
        replay_run(settings, capture_file, out_dir=out)
        first = (out / "frames_bed1.csv").read_text()
        replay_run(settings, capture_file, out_dir=out)
        second = (out / "frames_bed1.csv").read_text()
        assert first.count("\n") == second.count("\n")

    def test_speedup_override_wins_over_settings(self, tmp_path, capture_file):
        settings = Settings(warmup=10, train_steps=20, speedup=1.0, poll_interval=60.0)
        out = tmp_path / "out"
        # settings alone would pace one frame a minute; the override must win
        counts = replay_run(
            settings, capture_file, out_dir=out, speedup=float("inf")
        )
        assert counts["frames"] == 120


class TestMonitorRun:
    def test_two_replay_beds_drain_and_archive(self, tmp_path, capture_file):
        settings = Settings(warmup=10, train_steps=20)
        settings.beds = [
            BedSource(bed="bed1", kind="replay", target=str(capture_file)),
            BedSource(bed="bed2", kind="replay", target=str(capture_file)),
        ]
        out = tmp_path / "out"
        screen = io.StringIO()
        counts = monitor_run(settings, out_dir=out, screen=screen)
        assert counts["frames"] == 240
        assert (out / "frames_bed1.csv").exists()
        assert (out / "frames_bed2.csv").exists()
        assert "bed1" in screen.getvalue() and "bed2" in screen.getvalue()

    def test_failed_source_degrades_bed_but_run_continues(
        self, tmp_path, capture_file
    ):
        settings = Settings(warmup=10, train_steps=20)
        settings.beds = [
            BedSource(bed="bed1", kind="replay", target=str(capture_file)),
            BedSource(bed="bed2", kind="replay", target=str(tmp_path / "missing.csv")),
        ]
        out = tmp_path / "out"
        screen = io.StringIO()
        counts = monitor_run(settings, out_dir=out, screen=screen)
        assert counts["frames"] == 120
        board: BoardState = counts["board"]
        assert board.tiles["bed2"].data_warning is True
        assert "source for bed2 failed" in screen.getvalue()
        events = (out / "events.csv").read_text()
        assert "bed2,data-warning-raised" in events

    def test_monitor_without_beds_is_an_error(self, tmp_path):
        with pytest.raises(SourceError, match="at least one bed"):
            monitor_run(Settings(), out_dir=tmp_path / "out")


class TestBuildSource:
    def test_kinds_map_to_source_classes(self, tmp_path, capture_file):
        import threading

        settings = Settings()
        stop = threading.Event()
        assert isinstance(
            build_source(
                BedSource("bed1", "replay", str(capture_file)), settings, stop
            ),
            ReplaySource,
        )
        assert isinstance(
            build_source(BedSource("bed1", "tail", str(capture_file)), settings, stop),
            TailSource,
        )
        assert isinstance(
            build_source(BedSource("bed1", "socket", "127.0.0.1:9"), settings, stop),
            SocketSource,
        )

    def test_socket_target_must_be_host_port(self):
        import threading

        with pytest.raises(SourceError, match="host:port"):
            build_source(
                BedSource("bed1", "socket", "nonsense"), Settings(), threading.Event()
            )
