#!/usr/bin/env python3
"""Smoke test for the proxbqp extension module.

Builds nothing itself: run `cargo build -p proxbqp-python` first, then
`python3 python/smoke_test.py`. The script locates the compiled cdylib under
target/, stages it as an importable `proxbqp` module, and exercises the whole
binding surface against hand-computed answers.
"""

import shutil
import sys
import tempfile
from pathlib import Path


def stage_module() -> None:
    root = Path(__file__).resolve().parent.parent
    names = ["libproxbqp.so", "libproxbqp.dylib", "proxbqp.dll"]
    candidates = [
        root / "target" / profile / name
        for profile in ("release", "debug")
        for name in names
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("no built module found; run `cargo build -p proxbqp-python` first")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="proxbqp-"))
    suffix = ".pyd" if newest.suffix == ".dll" else ".so"
    shutil.copy2(newest, stage / f"proxbqp{suffix}")
    sys.path.insert(0, str(stage))


stage_module()

import proxbqp  # noqa: E402


def check(label: str, ok: bool) -> None:
    print(f"  {label}: {'ok' if ok else 'FAIL'}")
    if not ok:
        sys.exit(1)


print("scalar problem")
# minimize 0.5*2x^2 + 0.5*(x - 0.5)^2 on [0, 1]: stationary at 3x = 0.5.
p = proxbqp.Problem(a=[[2.0]], b=[0.0], v=[0.5], lower=[0.0], upper=[1.0], mu=1.0)
s = proxbqp.solve(p, tol=1e-10)
check("status converged", s.status == "converged")
check("z = 1/6", abs(s.z[0] - 1.0 / 6.0) < 1e-8)
check("kkt residual small", s.kkt_residual < 1e-8)
check("oracle agrees", abs(proxbqp.oracle_solve(p)[0] - 1.0 / 6.0) < 1e-12)
check("kkt of oracle point", proxbqp.kkt_residual(p, [1.0 / 6.0]) < 1e-12)

print("pinned bounds")
pinned = proxbqp.Problem(
    a=[[2.0]], b=[5.0], v=[-3.0], lower=[0.25], upper=[0.25], mu=1.0
)
s2 = proxbqp.solve(pinned)
check("l = u pins z", s2.z == [0.25])

print("penalty selection")
check("rho of diag(1,4) is 2", proxbqp.default_rho([[1.0, 0.0], [0.0, 4.0]]) == 2.0)

print("warm start")
base = proxbqp.Problem(
    a=[[4.0, 1.0], [1.0, 3.0]],
    b=[1.0, -2.0],
    v=[0.3, 0.7],
    lower=[0.0, 0.0],
    upper=[1.0, 1.0],
    mu=2.0,
)
cold = proxbqp.solve(base, tol=1e-9)
warm = proxbqp.solve(base, tol=1e-9, warm_z=cold.warm_z, warm_zeta=cold.warm_zeta)
check("warm start is cheaper", warm.iterations <= cold.iterations)
check("same answer", max(abs(a - b) for a, b in zip(cold.z, warm.z)) < 1e-7)

print("batch of three")
a = [[4.0, 1.0], [1.0, 3.0]]
bs = [[1.0, -2.0], [0.5, 0.5], [-1.0, 2.0]]
vs = [[0.3, 0.7], [0.9, 0.1], [0.5, 0.5]]
batch = proxbqp.solve_batch(
    a, bs, vs, lower=[0.0, 0.0], upper=[1.0, 1.0], mu=2.0, tol=1e-9, mode="async"
)
check("all converged", all(st == "converged" for st in batch.statuses))
singles = [
    proxbqp.solve(
        proxbqp.Problem(a=a, b=b, v=v, lower=[0.0, 0.0], upper=[1.0, 1.0], mu=2.0),
        tol=1e-9,
    ).z
    for b, v in zip(bs, vs)
]
worst = max(
    abs(x - y) for zc, zs in zip(batch.z, singles) for x, y in zip(zc, zs)
)
check("matches per-problem solves", worst < 1e-12)
sync = proxbqp.solve_batch(
    a, bs, vs, lower=[0.0, 0.0], upper=[1.0, 1.0], mu=2.0, tol=1e-9, mode="sync"
)
worst_sync = max(
    abs(x - y) for zc, zs in zip(sync.z, batch.z) for x, y in zip(zc, zs)
)
check("sync agrees with async", worst_sync < 1e-7)

print("cg backend")
s_cg = proxbqp.solve(base, tol=1e-9, backend="cg")
check("cg matches cholesky", max(abs(a - b) for a, b in zip(s_cg.z, cold.z)) < 1e-7)

print("binarization")
check("rounds with ties up", proxbqp.binarize([0.2, 0.5, 0.9]) == [0.0, 1.0, 1.0])

print("error paths")
for label, thunk in [
    ("asymmetric matrix", lambda: proxbqp.Problem(
        a=[[1.0, 2.0], [0.0, 1.0]], b=[0.0, 0.0], v=[0.0, 0.0],
        lower=[0.0, 0.0], upper=[1.0, 1.0], mu=1.0)),
    ("crossed bounds", lambda: proxbqp.Problem(
        a=[[1.0]], b=[0.0], v=[0.0], lower=[1.0], upper=[0.0], mu=1.0)),
    ("unknown backend", lambda: proxbqp.solve(p, backend="lu")),
    ("lone warm_z", lambda: proxbqp.solve(p, warm_z=[0.0])),
    ("out-of-range binarize", lambda: proxbqp.binarize([1.5])),
]:
    try:
        thunk()
    except ValueError:
        check(label + " raises ValueError", True)
    else:
        check(label + " raises ValueError", False)

print("smoke test passed")
