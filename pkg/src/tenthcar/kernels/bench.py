"""Timing comparison between the compiled and pure-numpy kernels on
representative workloads (full-revolution raycast, scan-match
accumulation, ray integration)."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import HAVE_NATIVE, pure

if HAVE_NATIVE:
    from . import _native
else:
    _native = None


@dataclass(frozen=True)
class BenchRow:
    kernel: str
    impl: str
    reps: int
    seconds_per_call: float


def _room_segments() -> np.ndarray:
    h = 2.0
    return np.array(
        [(-h, -h, h, -h), (h, -h, h, h), (h, h, -h, h), (-h, h, -h, -h)]
    )


def _workloads():
    segs = _room_segments()
    n = 1000
    ang = np.linspace(0, 2 * math.pi, n, endpoint=False)
    cos_a, sin_a = np.cos(ang), np.sin(ang)

    rng = np.random.default_rng(7)
    grid = rng.uniform(-2, 2, size=(240, 240))
    r = rng.uniform(0.5, 1.9, size=n)
    ex, ey = r * cos_a, r * sin_a
    hx, hy = ex.copy(), ey.copy()

    def raycast(mod):
        mod.raycast_segments(0.1, -0.2, cos_a, sin_a, segs)

    def accumulate(mod):
        mod.match_accumulate(grid, 0.05, -6.0, -6.0, ex, ey, 0.02, -0.01, 0.015)

    def integrate(mod):
        cells = np.zeros((240, 240))
        mod.ray_updates(cells, 0.05, -6.0, -6.0, 0.0, 0.0, hx, hy, -0.4, 0.9, -4.0, 4.0)

    return [("raycast", raycast, 200), ("match_accumulate", accumulate, 200),
            ("ray_updates", integrate, 50)]


def run_bench() -> list[BenchRow]:
    impls = [("pure", pure)]
    if _native is not None:
        impls.append(("native", _native))
    rows = []
    for name, fn, reps in _workloads():
        for impl_name, mod in impls:
            fn(mod)  # warm up
            t0 = time.perf_counter()
            for _ in range(reps):
                fn(mod)
            dt = (time.perf_counter() - t0) / reps
            rows.append(BenchRow(name, impl_name, reps, dt))
    return rows


def format_bench(rows: list[BenchRow]) -> str:
    lines = [f"{'kernel':<20} {'impl':<8} {'reps':>6} {'us/call':>12}"]
    lines.append("-" * len(lines[0]))
    by_kernel: dict[str, dict[str, float]] = {}
    for r in rows:
        lines.append(
            f"{r.kernel:<20} {r.impl:<8} {r.reps:>6d} {r.seconds_per_call * 1e6:>12.1f}"
        )
        by_kernel.setdefault(r.kernel, {})[r.impl] = r.seconds_per_call
    for kernel, t in by_kernel.items():
        if "native" in t and "pure" in t and t["native"] > 0:
            lines.append(f"{kernel}: native speedup {t['pure'] / t['native']:.1f}x")
    if not any(r.impl == "native" for r in rows):
        lines.append("native kernels not built; showing pure numpy only")
    return "\n".join(lines)
