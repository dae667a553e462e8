"""Per-task-set CPU/memory profiling.

Each requested task set runs as its own scenario while a sampler thread
reads process CPU and resident memory at 10 Hz. CPU is normalized to
total machine capacity (one saturated core on an N-core host reads
100/N). Absolute numbers are host-specific; only the idle and busy-spin
calibration rows carry numeric expectations.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, replace

import psutil

SAMPLE_HZ = 10.0

DEFAULT_LADDER = (
    ("actuator",),
    ("actuator", "pcm"),
    ("actuator", "pcm", "slam"),
    ("actuator", "pcm", "mpc"),
    ("actuator", "pcm", "slam", "mpc"),
)


@dataclass(frozen=True)
class TaskProfile:
    label: str
    cpu_percent: float
    mem_percent: float
    samples: int
    available: bool = True
    note: str = ""


class _Sampler:
    def __init__(self, sample_hz: float = SAMPLE_HZ):
        self.period = 1.0 / sample_hz
        self.cpu: list[float] = []
        self.mem: list[float] = []
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._proc = psutil.Process()
        self._ncpu = psutil.cpu_count(logical=True) or 1

    def _run(self):
        self._proc.cpu_percent(None)  # prime the differential counter
        while not self._stop.wait(self.period):
            self.cpu.append(self._proc.cpu_percent(None) / self._ncpu)
            self.mem.append(self._proc.memory_percent("rss"))

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        self._thread.join(timeout=2.0)


def _measure(label: str, workload, note: str = "") -> TaskProfile:
    try:
        with _Sampler() as s:
            workload()
        if not s.cpu:
            return TaskProfile(label, 0.0, 0.0, 0, False, "no samples collected")
        cpu = sum(s.cpu) / len(s.cpu)
        mem = max(s.mem)
        return TaskProfile(label, cpu, mem, len(s.cpu), True, note)
    except (psutil.Error, OSError) as exc:
        return TaskProfile(label, 0.0, 0.0, 0, False, f"sampling unavailable: {exc}")


def idle_profile(duration: float = 1.5) -> TaskProfile:
    def workload():
        end = time.monotonic() + duration
        while time.monotonic() < end:
            time.sleep(0.02)

    return _measure("idle", workload, "calibration: sleep loop")


def spin_profile(duration: float = 1.5) -> TaskProfile:
    def workload():
        end = time.monotonic() + duration
        x = 0
        while time.monotonic() < end:
            x += 1

    return _measure("busy-spin", workload, "calibration: one saturated core")


def profile_tasks(cfg, ladder=None, include_calibration: bool = True) -> list[TaskProfile]:
    """One row per task set (plus calibration rows); a row is marked
    unavailable rather than omitted when sampling fails."""
    from .scenario import run_scenario  # avoid a module cycle

    rows: list[TaskProfile] = []
    if include_calibration:
        rows.append(idle_profile(cfg.profile_duration))
        rows.append(spin_profile(cfg.profile_duration))

    ladder = list(ladder if ladder is not None else (cfg.ladder or DEFAULT_LADDER))
    for task_set in ladder:
        tasks = tuple(task_set)
        label = "+".join(tasks)
        sub_cfg = replace(cfg, tasks=tasks, ladder=())

        def workload(c=sub_cfg):
            # A single short scenario can finish inside one sample period;
            # repeat it until the profiling window has elapsed.
            end = time.monotonic() + cfg.profile_duration
            while True:
                run_scenario(c)
                if time.monotonic() >= end:
                    break

        rows.append(_measure(label, workload))
    return rows


def format_table(rows: list[TaskProfile]) -> str:
    header = f"{'task set':<26} {'cpu %':>8} {'mem %':>8} {'samples':>8}  note"
    lines = [header, "-" * len(header)]
    for r in rows:
        if r.available:
            lines.append(
                f"{r.label:<26} {r.cpu_percent:>8.2f} {r.mem_percent:>8.2f} "
                f"{r.samples:>8d}  {r.note}"
            )
        else:
            lines.append(f"{r.label:<26} {'n/a':>8} {'n/a':>8} {r.samples:>8d}  {r.note}")
    return "\n".join(lines)
