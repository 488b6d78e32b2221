"""Command line: analyze, predict, simulate, fit and hierarchy.

Exit codes: 0 success, 1 invalid input, 2 numerical or simulation failure.
HETLAB_SEED, when set, overrides --seed.
"""

from __future__ import annotations

import os
import sys
import time
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .errors import AllTimeout, HetlabRuntimeError, ValidationError
from .exponents import classify_escape
from .hierarchy import cellular_flow_network, timescale_ladder
from .io import RunManifest, csv_text, manifest_path, to_json, write_json, write_text
from .kernel import (EntranceLaw, SaddleBox, chain_prefactor, exit_direction_prob, exit_time_tail,
                     local_limit_prediction, model_variances, typical_exit_law)
from .lab import CSV_COLUMNS, LadderConfig, run_ladder, wilson_interval
from .network import Saddle, _read_json, load_chain_spec, load_network_spec
from .sim import Side, TransportMap, simulate_chain_batch
from .svg import fit_plot

PREDICTIONS = ("exit-time-tail", "local-limit", "exit-direction", "typical-law", "prefactor")


# ---------------------------------------------------------------------------
# option parsing


def _floats(text: str, what: str, count: Optional[int] = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise ValidationError(f"{what}: expected {count} numbers, got {len(vals)}")
    return vals


def parse_box(text: str) -> SaddleBox:
    R, L, Lp = _floats(text, "--box", 3)
    return SaddleBox(R, L, Lp)


def parse_entrance(text: str) -> EntranceLaw:
    kind, _, rest = text.partition(":")
    vals = _floats(rest, "--entrance") if rest else []
    if kind == "point":
        return EntranceLaw.point(vals[0] if vals else 0.0)
    if kind in ("normal", "uniform"):
        if len(vals) != 2:
            raise ValidationError(f"--entrance {kind} needs two parameters")
        return EntranceLaw(kind, *vals)
    raise ValidationError(f"--entrance: unknown kind {kind!r} (point, normal, uniform)")


def parse_transport(text: str) -> TransportMap:
    a, b, flip, travel = _floats(text, "--transport", 4)
    return TransportMap(a, b, int(flip), travel)


def resolve_seed(seed: int) -> int:
    env = os.environ.get("HETLAB_SEED")
    if env is None or env == "":
        return seed
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"HETLAB_SEED must be an integer, got {env!r}") from None


class _Run:
    """Collects manifest data while a subcommand runs."""

    def __init__(self, name: str, config: dict, seed: Optional[int] = None):
        self.manifest = RunManifest(name, config, seed, __version__)
        self.t0 = time.perf_counter()

    def input(self, path) -> None:
        self.manifest.add_input(path)

    def finish(self, outputs: list) -> None:
        outputs = [str(o) for o in outputs if o is not None]
        if not outputs:
            return
        self.manifest.outputs = outputs
        self.manifest.wall_time = time.perf_counter() - self.t0
        self.manifest.write(manifest_path(outputs[0]))


def _manifest_ref(out: Optional[str]) -> Optional[str]:
    return None if out is None else manifest_path(out).name


# ---------------------------------------------------------------------------
# commands


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="hetlab")
def cli() -> None:
    """Exponent calculus and Monte Carlo checks for cell escapes near heteroclinic networks."""


@cli.command()
@click.option("--chain", "chain_path", required=True, help="chain JSON file")
@click.option("--out", default=None, help="write the exponent report as JSON")
def analyze(chain_path: str, out: Optional[str]) -> None:
    """Exponent report for an escape chain."""
    run = _Run("analyze", {"chain": chain_path})
    spec = load_chain_spec(chain_path)
    run.input(chain_path)
    rep = classify_escape(spec)
    rows = [("regime", rep.regime.value), ("alpha", _seq(rep.alpha)), ("kappa", rep.kappa),
            ("H", list(rep.H)), ("H_prime", list(rep.H_prime)), ("J", list(rep.J)),
            ("bar_alpha", _seq(rep.bar_alpha)), ("theta", _num(rep.theta)),
            ("chi_bar", _num(rep.chi_bar)), ("chi", _num(rep.chi))]
    for k, v in rows:
        click.echo(f"{k:<10} {v}")
    if out:
        d = rep.to_dict()
        d["manifest"] = _manifest_ref(out)
        write_json(out, d)
        run.finish([out])


def _num(v) -> str:
    return "none" if v is None else f"{v:.12g}"


def _seq(vs) -> str:
    return "none" if vs is None else "(" + ", ".join(f"{v:.12g}" for v in vs) + ")"


@cli.command()
@click.option("--saddle", "saddle_path", default=None,
              help='JSON {"saddle": {"lambda", "mu"}, "box": {"R", "L", "L_prime"}} or a bare saddle')
@click.option("--chain", "chain_path", default=None, help="two-saddle chain JSON (prefactor)")
@click.option("--what", type=click.Choice(PREDICTIONS), required=True)
@click.option("--x", type=float, default=0.0, help="rescaled entrance coordinate")
@click.option("--alpha", type=float, default=1.0)
@click.option("--theta", type=float, default=0.0, help="strip exponent (exit-time-tail)")
@click.option("--beta", type=float, default=1.0)
@click.option("--c", "shift", type=float, default=0.0, help="time shift (exit-time-tail)")
@click.option("--r", type=float, default=1.0, help="strip half-width (exit-time-tail)")
@click.option("--eps", type=float, default=None)
@click.option("--a", type=float, default=0.0, help="window start (local-limit)")
@click.option("--b", type=float, default=1.0, help="window end (local-limit)")
@click.option("--box", "box_text", default=None, help="R,L,L' (overrides the file)")
@click.option("--entrance", default="normal:0,1", help="point:x | normal:m,sd | uniform:a,b")
@click.option("--out", default=None)
def predict(saddle_path, chain_path, what, x, alpha, theta, beta, shift, r, eps, a, b, box_text,
            entrance, out) -> None:
    """Closed-form prediction for a saddle (or a two-saddle chain)."""
    cfg = dict(saddle=saddle_path, chain=chain_path, what=what, x=x, alpha=alpha, theta=theta, beta=beta,
               c=shift, r=r, eps=eps, a=a, b=b, box=box_text, entrance=entrance)
    run = _Run("predict", cfg)
    box = parse_box(box_text) if box_text else None
    if what == "prefactor":
        if chain_path is None:
            raise ValidationError("prefactor needs --chain")
        spec = load_chain_spec(chain_path)
        run.input(chain_path)
        box = box or SaddleBox()
        law = parse_entrance(entrance)
        res = {"prefactor": chain_prefactor(spec, box, law), "theta": classify_escape(spec).theta,
               "box": box.to_dict(), "entrance": law.to_dict()}
    else:
        if saddle_path is None:
            raise ValidationError(f"{what} needs --saddle")
        data = _read_json(saddle_path)
        run.input(saddle_path)
        if not isinstance(data, dict):
            raise ValidationError("saddle file must hold a JSON object")
        saddle = Saddle.from_dict(data.get("saddle", data))
        box = box or SaddleBox.from_dict(data.get("box", {}))
        c1, c2 = model_variances(saddle)
        res = {"saddle": saddle.to_dict(), "box": box.to_dict(), "c1": c1, "c2": c2}
        if what == "exit-direction":
            res["p_left"] = float(exit_direction_prob(x, c1))
            res["x"] = x
        elif what == "exit-time-tail":
            if eps is None:
                raise ValidationError("exit-time-tail needs --eps")
            res["tail"] = exit_time_tail(x, alpha, theta, beta, shift, r, saddle, eps)
        elif what == "local-limit":
            res["coefficient"] = local_limit_prediction(x, a, b, beta, saddle, box)
            res["scaling_exponent"] = beta / saddle.rho - 1.0
            if eps is not None:
                res["probability"] = res["coefficient"] * eps ** res["scaling_exponent"]
        else:
            law = typical_exit_law(alpha, saddle, box, x, eps)
            res.update(case=law.case, alpha_prime=law.alpha_prime, c=law.c, plus_mass=law.plus_mass())
    click.echo(to_json(res))
    if out:
        res["manifest"] = _manifest_ref(out)
        write_json(out, res)
        run.finish([out])


def _chain_inputs(chain_path, box_text, entrance, transport):
    spec = load_chain_spec(chain_path)
    box = parse_box(box_text)
    law = parse_entrance(entrance)
    tmap = parse_transport(transport)
    return spec, box, law, [tmap] * spec.n


_chain_options = [
    click.option("--chain", "chain_path", required=True, help="chain JSON file"),
    click.option("--dt", type=float, default=None, help="time step (default 1e-3 / max rate)"),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--threads", type=int, default=None),
    click.option("--box", "box_text", default="1,0.5,1", show_default=True, help="R,L,L'"),
    click.option("--entrance", default="normal:0,1", show_default=True),
    click.option("--transport", default="1,1,1,1", show_default=True, help="a,b,flip,travel_time"),
    click.option("--max-time", type=float, default=None),
]


def chain_options(f):
    for opt in reversed(_chain_options):
        f = opt(f)
    return f


@cli.command()
@chain_options
@click.option("--eps", type=float, required=True)
@click.option("--samples", type=int, required=True)
@click.option("--record-paths", default=None, help="per-path CSV")
@click.option("--out", default=None, help="summary JSON")
@click.option("--chunk", type=int, default=1 << 18, hidden=True)
def simulate(chain_path, dt, seed, threads, box_text, entrance, transport, max_time, eps, samples,
             record_paths, out, chunk) -> None:
    """Monte Carlo run of one chain at one noise level."""
    seed = resolve_seed(seed)
    cfg = dict(chain=chain_path, eps=eps, samples=samples, dt=dt, box=box_text, entrance=entrance,
               transport=transport, max_time=max_time)
    run = _Run("simulate", cfg, seed)
    if samples < 1:
        raise ValidationError("--samples must be >= 1")
    if not eps > 0:
        raise ValidationError("--eps must be > 0")
    spec, box, law, maps = _chain_inputs(chain_path, box_text, entrance, transport)
    run.input(chain_path)
    hits = total = timeouts = 0
    esc_time = 0.0
    fh = None
    if record_paths:
        Path(record_paths).parent.mkdir(parents=True, exist_ok=True)
        fh = open(record_paths, "w", encoding="utf-8", newline="\n")
        cols = ["path_id", "escaped", "total_time"]
        for k in range(1, spec.n + 1):
            cols += [f"exit_{k}", f"side_{k}", f"loc_{k}"]
        fh.write(",".join(cols) + "\n")
    batch = None
    try:
        for start in range(0, samples, chunk):
            batch = simulate_chain_batch(spec, maps, eps, dt, seed, min(chunk, samples - start), start=start,
                                         box=box, entrance=law, max_time=max_time, threads=threads)
            hits += batch.hits
            timeouts += batch.timeouts
            total += batch.size
            esc_time += float(batch.total_time[batch.escaped].sum())
            if fh:
                fh.write(_path_rows(batch, spec.n))
    finally:
        if fh:
            fh.close()
    n = total - timeouts
    if n == 0:
        raise AllTimeout(f"all {total} paths timed out")
    lo, hi = wilson_interval(hits, n)
    rep = classify_escape(spec)
    res = {"eps": eps, "samples": total, "hits": hits, "n": n, "timeouts": timeouts, "p_hat": hits / n,
           "ci_low": lo, "ci_high": hi, "mean_escape_time": esc_time / hits if hits else None,
           "regime": rep.regime.value, "theta": rep.theta, "chi_bar": rep.chi_bar,
           "dt": batch.dt, "max_time": batch.max_time}
    click.echo(to_json(res))
    if out:
        res["manifest"] = _manifest_ref(out)
        write_json(out, res)
    run.finish([out, record_paths])


def _path_rows(batch, n: int) -> str:
    lines = []
    for i in range(batch.size):
        parts = [str(int(batch.path_ids[i])), "1" if batch.status[i] == 0 else "0",
                 format(float(batch.total_time[i]), ".17g")]
        for k in range(n):
            s = int(batch.side[i, k])
            if s == 0:
                parts += ["", "", ""]
            else:
                parts += [format(float(batch.time[i, k]), ".17g"), Side(s).name.lower(),
                          format(float(batch.location[i, k]), ".17g")]
        lines.append(",".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


@cli.command()
@chain_options
@click.option("--eps-ladder", default="0.2,0.1,0.05,0.025", show_default=True)
@click.option("--samples", type=int, default=1_000_000, show_default=True)
@click.option("--out", default="table.csv", show_default=True)
@click.option("--plot", default=None, help="log-log SVG")
def fit(chain_path, dt, seed, threads, box_text, entrance, transport, max_time, eps_ladder, samples, out,
        plot) -> None:
    """Escape probabilities along an eps ladder and a power-law fit."""
    seed = resolve_seed(seed)
    cfg = dict(chain=chain_path, eps_ladder=eps_ladder, samples=samples, dt=dt, box=box_text,
               entrance=entrance, transport=transport, max_time=max_time)
    run = _Run("fit", cfg, seed)
    config = LadderConfig(tuple(_floats(eps_ladder, "--eps-ladder")), samples, seed, dt)
    spec, box, law, maps = _chain_inputs(chain_path, box_text, entrance, transport)
    run.input(chain_path)
    res = run_ladder(config, spec, maps, box, law, threads=threads, max_time=max_time)
    rows = res.table.rows
    write_text(out, csv_text(CSV_COLUMNS, [r.as_tuple() for r in rows]))
    rep = classify_escape(spec)
    f = res.table.fit
    summary = {"theta_pred": rep.theta, "regime": rep.regime.value}
    if f is not None:
        summary.update(theta_hat=f.theta_hat, h_hat=f.h_hat, stderr_theta=f.stderr_theta,
                       r_squared=f.r_squared, rows_used=f.rows_used)
    click.echo(csv_text(CSV_COLUMNS, [r.as_tuple() for r in rows]), nl=False)
    click.echo(to_json(summary))
    run.manifest.config["fit"] = summary
    if plot:
        pl = fit_plot(rows, f.theta_hat if f else None, f.h_hat if f else None, rep.theta)
        write_text(plot, pl.render(stamp=f"hetlab {__version__} fit; manifest {_manifest_ref(out)}; "
                                         f"{time.strftime('%Y-%m-%dT%H:%M:%S')}"))
    run.finish([out, plot])


@cli.command()
@click.option("--network", "network_path", default=None, help="network JSON file")
@click.option("--cellular-flow", is_flag=True, help="use the built-in doubly periodic cellular flow")
@click.option("--size", type=int, default=4, show_default=True, help="patch size for --cellular-flow")
@click.option("--out", default=None, help="report JSON")
@click.option("--dot", default=None, help="cluster-merge tree as Graphviz DOT")
def hierarchy(network_path, cellular_flow, size, out, dot) -> None:
    """Timescale ladder, clusters and weights of a periodic network (heuristic)."""
    run = _Run("hierarchy", dict(network=network_path, cellular_flow=cellular_flow, size=size))
    if network_path is None and not cellular_flow:
        raise ValidationError("give --network or --cellular-flow")
    if network_path is not None:
        net = load_network_spec(network_path)
        run.input(network_path)
    else:
        net = cellular_flow_network(size=size)
    rep = timescale_ladder(net)
    d = rep.to_dict()
    if out:
        d["manifest"] = _manifest_ref(out)
        write_json(out, d)
    else:
        click.echo(to_json(d))
    if dot:
        write_text(dot, rep.to_dot())
    if out is None:
        click.echo(f"levels: {', '.join(f'{v:.12g}' for v in rep.levels) or 'none'}", err=True)
    run.finish([out, dot])


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="hetlab", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except HetlabRuntimeError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        return 2
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
