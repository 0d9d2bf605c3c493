"""CSV and plot-data writers.

Numbers are written with a fixed 17-significant-digit format, which
is locale independent and round-trips exactly. Every row carries its time and
coordinates explicitly.

Schemas::

    state.csv              m,t,j,i,x,y,value
    surface.csv            m,t,circle,i,x,value
    control.csv            m,t,j,i,x,y,u
    control_surface.csv    m,t,circle,i,x,u_Gamma
    multipliers.csv        m,t,j,i,x,y,xi
    multipliers_surface.csv m,t,circle,i,x,xi_Gamma
    adjoint.csv            k,t,j,i,x,y,p,lambda          (lambda empty at k = nt)
    adjoint_surface.csv    k,t,circle,i,x,p_Gamma,lambda_Gamma
    iterations.csv         iter,J,vi_residual,step_length,newton_iters_total
    path_summary.csv       label,alpha,J,J_adapted,vi_residual,dist_to_anchor,comp_bulk,comp_surf,
                           conc_bulk,conc_surf,proj_residual,<energy keys>,status

Circle 0 is the bottom boundary (``y = 0``), circle 1 the top.
"""

import csv
from pathlib import Path

import numpy as np

from .fields import ControlPair

ENERGY_KEYS = (
    "dt_bulk",
    "sup_v_bulk",
    "lap_bulk",
    "dt_surface",
    "sup_v_surface",
    "lap_surface",
    "potential_bulk",
    "potential_surface",
)
SUMMARY_COLUMNS = (
    ("label", "alpha", "J", "J_adapted", "vi_residual", "dist_to_anchor")
    + ("comp_bulk", "comp_surf", "conc_bulk", "conc_surf", "proj_residual")
    + ENERGY_KEYS
    + ("status",)
)


def fmt(v):
    if isinstance(v, (str, int, np.integer)):
        return str(v)
    if v is None:
        return ""
    return f"{float(v):.17g}"


def _writer(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_bulk_series(path, grid, times, columns, header, index="m", first=0):
    """One row per (time node, j, i); ``columns`` hold one spatial array (or None) per time."""
    fh, w = _writer(path)
    with fh:
        w.writerow((index, "t", "j", "i", "x", "y") + tuple(header))
        for m, t in enumerate(times):
            for j in range(grid.ny + 2):
                for i in range(grid.nx):
                    vals = tuple(fmt(None if c[m] is None else c[m][j, i]) for c in columns)
                    w.writerow((m + first, fmt(t), j, i, fmt(grid.x[i]), fmt(grid.y[j])) + vals)


def write_surface_series(path, grid, times, columns, header, index="m", first=0):
    fh, w = _writer(path)
    with fh:
        w.writerow((index, "t", "circle", "i", "x") + tuple(header))
        for m, t in enumerate(times):
            for c in range(2):
                for i in range(grid.nx):
                    vals = tuple(fmt(None if col[m] is None else col[m][c, i]) for col in columns)
                    w.writerow((m + first, fmt(t), c, i, fmt(grid.x[i])) + vals)


def write_trajectory(out, traj):
    out = Path(out)
    t = traj.time.times
    write_bulk_series(out / "state.csv", traj.grid, t, [traj.bulk], ["value"])
    write_surface_series(out / "surface.csv", traj.grid, t, [traj.surface], ["value"])
    if traj.xi is not None:
        steps = traj.time.times[1:]
        write_bulk_series(out / "multipliers.csv", traj.grid, steps, [traj.xi], ["xi"], first=1)
        write_surface_series(out / "multipliers_surface.csv", traj.grid, steps, [traj.xi_surface], ["xi_Gamma"], first=1)


def write_control(out, ctrl, grid, time, stem="control"):
    out = Path(out)
    steps = time.times[1:]
    write_bulk_series(out / f"{stem}.csv", grid, steps, [ctrl.bulk], ["u"], first=1)
    write_surface_series(out / f"{stem}_surface.csv", grid, steps, [ctrl.surface], ["u_Gamma"], first=1)


def write_adjoint(out, adj, lam):
    out = Path(out)
    lam_b = list(lam.bulk) + [None]
    lam_s = list(lam.surface) + [None]
    t = adj.time.times
    write_bulk_series(out / "adjoint.csv", adj.grid, t, [adj.bulk, lam_b], ["p", "lambda"], index="k")
    write_surface_series(out / "adjoint_surface.csv", adj.grid, t, [adj.surface, lam_s], ["p_Gamma", "lambda_Gamma"], index="k")


def read_control(path_bulk, path_surface, grid, time):
    """Inverse of :func:`write_control`."""
    bulk = np.zeros((time.nt,) + grid.shape)
    surface = np.zeros((time.nt,) + grid.surface_shape)
    for path, arr, val in ((path_bulk, bulk, "u"), (path_surface, surface, "u_Gamma")):
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                jj = row["j"] if "j" in row else row["circle"]
                arr[int(row["m"]) - 1, int(jj), int(row["i"])] = float(row[val])
    return ControlPair(bulk, surface)


def write_iterations(path, history):
    fh, w = _writer(path)
    with fh:
        w.writerow(("iter", "J", "vi_residual", "step_length", "newton_iters_total"))
        for rec in history:
            w.writerow((rec.iteration, fmt(rec.cost), fmt(rec.vi_residual), fmt(rec.step_length), rec.newton_iters_total))


def summary_rows(path):
    rows = []
    for k, rec in enumerate(path.records):
        proj = rec.projection.residual if rec.projection is not None else np.nan
        rows.append(
            [f"alpha_{k}", rec.alpha, rec.cost, rec.adapted_cost, rec.vi_residual, rec.dist_to_anchor]
            + list(rec.complementarity)
            + list(rec.concentration)
            + [proj]
            + [rec.energy.get(key, np.nan) for key in ENERGY_KEYS]
            + ["failed" if rec.failed else "ok"]
        )
    ob = path.obstacle
    if ob is not None:
        rows.append(
            ["obstacle", 0.0, ob.cost, ob.adapted_cost, np.nan, ob.dist_to_anchor]
            + [np.nan] * 5
            + [ob.energy[key] for key in ENERGY_KEYS]
            + ["ok"]
        )
    else:
        rows.append(["obstacle", 0.0] + [np.nan] * (len(SUMMARY_COLUMNS) - 3) + ["failed"])
    return rows


def write_path_summary(out_path, path):
    fh, w = _writer(out_path)
    with fh:
        w.writerow(SUMMARY_COLUMNS)
        for row in summary_rows(path):
            w.writerow([fmt(v) for v in row])


def _two_column(path, pairs):
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a, b in pairs:
            fh.write(f"{fmt(a)} {fmt(b)}\n")


def export_plot_data(path, out_dir):
    """gnuplot-ready files: one ``alpha value`` line per schedule entry, plus field snapshots.

    Failed records are written with ``nan``. Snapshots are ``x y value``
    blocks (blank line between rows of the grid) of the last successful state
    at ``t = 0``, ``T/2`` and ``T``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = path.records
    proj = [r.projection.residual if r.projection is not None else np.nan for r in recs]
    _two_column(out / "dist_to_anchor.dat", [(r.alpha, r.dist_to_anchor) for r in recs])
    _two_column(out / "cost.dat", [(r.alpha, r.adapted_cost) for r in recs])
    _two_column(out / "proj_residual.dat", [(r.alpha, p) for r, p in zip(recs, proj)])
    _two_column(out / "potential_norm.dat", [(r.alpha, r.energy.get("potential_bulk", np.nan)) for r in recs])
    done = path.successful()
    if not done:
        return out
    traj = done[-1].state
    g, nt = traj.grid, traj.time.nt
    for label, m in (("t0", 0), ("thalf", nt // 2), ("tT", nt)):
        with open(out / f"snapshot_{label}.dat", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# t = {fmt(traj.time.times[m])}\n")
            for j in range(g.ny + 2):
                for i in range(g.nx):
                    fh.write(f"{fmt(g.x[i])} {fmt(g.y[j])} {fmt(traj.bulk[m, j, i])}\n")
                fh.write("\n")
    return out
