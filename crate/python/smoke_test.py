#!/usr/bin/env python3
"""Smoke test for the constel_py extension module.

Builds the cdylib with cargo if needed, places it next to this script as an
importable extension, and exercises the main entry points end to end.

Run from the repository root (or anywhere):

    python3 python/smoke_test.py
"""

import shutil
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent


def ensure_extension() -> None:
    """Build target/release/libconstel_py.so and copy it here as constel_py.so."""
    ext = HERE / "constel_py.so"
    lib = ROOT / "target" / "release" / "libconstel_py.so"
    if not lib.exists() or not ext.exists():
        print("building constel-py (cargo build -p constel-py --release)...")
        subprocess.run(
            ["cargo", "build", "-p", "constel-py", "--release"],
            cwd=ROOT,
            check=True,
        )
    if not ext.exists() or lib.stat().st_mtime > ext.stat().st_mtime:
        shutil.copy2(lib, ext)


def approx(a: float, b: float, tol: float = 1e-9) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main() -> int:
    ensure_extension()
    sys.path.insert(0, str(HERE))
    import constel_py as cp

    print(f"constel_py {cp.__version__}")

    # Worked example structure: 8 acquisition and 9 downlink variables.
    inst = cp.Instance.paper_example()
    assert inst.n == 2 and inst.m == 3, repr(inst)
    assert inst.nx == 8 and inst.ny == 9, (inst.nx, inst.ny)

    # Centralized solve schedules every target exactly once.
    sched = cp.solve_central(inst, coupling="eq")
    assert sched["violations"] == 0
    targets_acquired = sorted(a["target"] for a in sched["acquisitions"])
    targets_downlinked = sorted(d["target"] for d in sched["downlinks"])
    assert targets_acquired == [0, 1, 2], targets_acquired
    assert targets_downlinked == [0, 1, 2], targets_downlinked
    for a in sched["acquisitions"]:
        d = next(x for x in sched["downlinks"] if x["target"] == a["target"])
        assert a["time"] <= d["time"], (a, d)
    print(f"centralized objective {sched['objective']:.3f}, status {sched['status']}")

    # Instance file round-trip.
    tmp = HERE / "_smoke_instance.json"
    try:
        inst.save(str(tmp))
        again = cp.Instance.load(str(tmp))
        assert again.to_json() == inst.to_json()
    finally:
        tmp.unlink(missing_ok=True)

    # Oracle agrees with the centralized solver on a micro instance.
    micro = cp.Instance.generate(seed=20, n=1, m=2, theta_max=2, omega_max=2, days=2)
    obj, feasible, total = cp.oracle_enumerate(micro, coupling="le")
    micro_sched = cp.solve_central(micro, coupling="le")
    assert obj is not None and approx(obj, micro_sched["objective"]), (obj, micro_sched["objective"])
    assert 0 < feasible <= total
    print(f"oracle optimum {obj:.3f} over {feasible}/{total} feasible assignments")

    # Distributed run: conservation holds and the recovery respects its slack.
    tl = cp.Timeline.generate(seed=3, n=2, frames=260, delta=8)
    assert tl.jointly_connected()
    summary = cp.solve_distributed(micro_two(cp), tl, tf=250, t0=10.0)
    assert summary["conservation_residual"] <= 1e-9, summary
    assert summary["coupling_violation_max"] <= summary["rho_star_sum"] + 1e-9, summary
    print(
        "distributed run: {iterations} iterations, recovered cost {recovered_cost:.3f}, "
        "residual {conservation_residual:.2e}".format(**summary)
    )

    print("smoke test OK")
    return 0


def micro_two(cp):
    return cp.Instance.generate(seed=9, n=2, m=2, theta_max=1, omega_max=1, days=2)


if __name__ == "__main__":
    sys.exit(main())
