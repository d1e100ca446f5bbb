"""Command-line harness: one subcommand per scenario, CSV on stdout or a file.

Exit codes: 0 success, 1 selftest failure, 2 configuration error,
3 dimension budget exceeded, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import channels, darwin, models
from .errors import BudgetError, InvariantViolation
from .qcore import SubsystemLayout, fidelity, ket, povm_probabilities, trace_distance

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET, EXIT_INVARIANT = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


# -- parameter registry ----------------------------------------------------


def _float_list(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    if str(text).lower() in ("1", "true", "yes", "on"):
        return True
    if str(text).lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], bool] = lambda v: True
    rule: str = ""
    help: str = ""


def _unit(v) -> bool:
    values = v if isinstance(v, list) else [v]
    return bool(values) and all(0.0 <= x <= 1.0 for x in values)


PARAMS: dict[str, Param] = {
    "gamma": Param(_float_list, [0.0], _unit, "in [0, 1]", "record overlap(s), comma separated"),
    "detector": Param(_choice("on", "off"), "on", help="which-path detector"),
    "outcome": Param(_choice("plus", "minus", "both"), "both", help="eraser post-selection outcome"),
    "n_env": Param(int, 1, lambda v: v >= 0, ">= 0", "number of scattered photons"),
    "n": Param(int, 4, lambda v: v >= 1, ">= 1", "number of environment fragments"),
    "alpha": Param(float, 1 / math.sqrt(2), lambda v: 0.0 <= v <= 1.0, "in [0, 1]", "amplitude of |up>"),
    "theta": Param(float, math.pi / 2, lambda v: 0.0 <= v <= math.pi, "in [0, pi]", "record rotation angle"),
    "depth": Param(int, 2, lambda v: v >= 1, ">= 1", "random interaction layers"),
    "delta": Param(float, 0.1, lambda v: 0.0 < v < 1.0, "in (0, 1)", "redundancy information deficit"),
    "resolution": Param(int, 64, lambda v: v >= 8, ">= 8", "Bloch grid points"),
    "model": Param(_choice("spam", "partial-record", "random", "identity", "depolarizing"), "spam", help="channel model"),
    "j": Param(int, 1, lambda v: v >= 1, ">= 1", "fragment index"),
    "n_min": Param(int, 1, lambda v: v >= 1, ">= 1", "smallest fragment count"),
    "n_max": Param(int, 6, lambda v: v >= 1, ">= 1", "largest fragment count"),
    "seeds": Param(int, 100, lambda v: v >= 1, ">= 1", "random instances per fragment count"),
    "family": Param(_choice("random", "spam"), "random", help="interaction family"),
    "rows": Param(_choice("summary", "full"), "summary", help="per-n summary or every fragment"),
    "quick": Param(_bool, False, help="only reference-value checks"),
}

COMMON: dict[str, Param] = {
    "seed": Param(int, None, lambda v: v is None or v >= 0, ">= 0", "master seed"),
    "output": Param(str, None, help="output path (default stdout)"),
    "budget_qubits": Param(int, models.DEFAULT_BUDGET_QUBITS, lambda v: v >= 1, ">= 1", "dense qubit budget"),
    "jobs": Param(int, 1, lambda v: v >= 1, ">= 1", "worker processes"),
}

COMMANDS: dict[str, dict] = {
    "mach-zehnder": {"params": ["gamma", "detector"], "help": "which-path interferometer"},
    "eraser": {"params": ["outcome"], "help": "post-selected erasure of the which-path record"},
    "cat": {"params": ["n_env", "gamma"], "help": "cat decohered by scattered photons"},
    "spam": {"params": ["n", "alpha"], "help": "fragment states of the redundant-record model"},
    "partial-record": {"params": ["n", "theta"], "help": "imperfect records: coherence and distinguishability"},
    "pointer-sieve": {"params": ["model", "n", "theta", "depth", "resolution"], "help": "purity over pure inputs"},
    "info-curve": {"params": ["model", "n", "alpha", "theta", "depth", "delta"], "help": "mutual information plateau", "seeded": True},
    "mp-fit": {"params": ["model", "n", "j", "theta", "depth", "resolution"], "help": "closest measure-and-prepare channel"},
    "emergence": {"params": ["n_min", "n_max", "seeds", "depth", "family", "resolution", "rows"], "help": "negativity and MP distance versus n", "seeded": True},
    "selftest": {"params": ["quick"], "help": "run the embedded acceptance suite"},
}

STOCHASTIC_MODELS = {"random"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict[str, Any]
    seed: int | None = None
    output: str | None = None
    budget_qubits: int = models.DEFAULT_BUDGET_QUBITS
    jobs: int = 1

    def __getitem__(self, key: str) -> Any:
        return self.params[key]

    def lines(self) -> list[str]:
        out = [f"command = {self.command}"]
        for key, value in self.params.items():
            out.append(f"{key} = {_render(value)}")
        for key in COMMON:
            value = getattr(self, key)
            if value is not None:
                out.append(f"{key} = {_render(value)}")
        return out


def _render(value) -> str:
    if isinstance(value, list):
        return ",".join(_render(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _coerce(name: str, spec: Param, raw) -> Any:
    try:
        value = spec.parse(raw) if isinstance(raw, str) else raw
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed value for {name}: {raw!r} ({exc})") from None
    if not spec.check(value):
        raise ConfigError(f"{name} = {_render(value)} out of range (must be {spec.rule})")
    return value


def parse_config(command: str, flags: dict[str, Any], config_file: str | None = None) -> RunConfig:
    """Resolve defaults < config file < command-line flags."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    allowed = {name: PARAMS[name] for name in COMMANDS[command]["params"]} | COMMON
    raw: dict[str, Any] = {}
    if config_file:
        file_values = read_config_file(config_file)
        unknown = sorted(set(file_values) - set(allowed))
        if unknown:
            raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
        raw.update(file_values)
    unknown = sorted(k for k, v in flags.items() if v is not None and k not in allowed)
    if unknown:
        raise ConfigError(f"unknown option(s) for {command}: {', '.join(unknown)}")
    raw.update({k: v for k, v in flags.items() if v is not None})
    resolved = {name: _coerce(name, spec, raw[name]) if name in raw else spec.default for name, spec in allowed.items()}
    params = {name: resolved[name] for name in COMMANDS[command]["params"]}
    seeded = COMMANDS[command].get("seeded") or (command in ("mp-fit", "pointer-sieve") and params.get("model") in STOCHASTIC_MODELS)
    if seeded and resolved["seed"] is None:
        raise ConfigError(f"{command} is stochastic and requires --seed")
    if command == "info-curve" and params["model"] not in ("spam", "partial-record", "random"):
        raise ConfigError("info-curve needs a fragment model: spam, partial-record or random")
    if command == "emergence" and params["n_min"] > params["n_max"]:
        raise ConfigError("n_min must not exceed n_max")
    if command == "mp-fit" and params["model"] not in ("identity", "depolarizing") and params["j"] > params["n"]:
        raise ConfigError(f"fragment j = {params['j']} exceeds n = {params['n']}")
    return RunConfig(command, params, resolved["seed"], resolved["output"], resolved["budget_qubits"], resolved["jobs"])


# -- CSV -------------------------------------------------------------------


def format_number(value) -> str:
    """17 significant digits for reals, so values survive a text round trip."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value == 0.0:
            value = 0.0  # drop the sign of negative zero
        return format(value, ".17g")
    return str(value)


def write_csv(header: list[str], rows: list[list[Any]], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])


def read_csv(text: str) -> tuple[list[str], list[list[Any]]]:
    """Parse CSV emitted by :func:`write_csv`, turning numeric fields back into numbers."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for record in reader:
        row = []
        for cell in record:
            try:
                row.append(int(cell))
            except ValueError:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
        rows.append(row)
    return header, rows


# -- commands --------------------------------------------------------------


def _alpha_state(alpha: float):
    return ket([alpha, math.sqrt(max(0.0, 1.0 - alpha * alpha))], SubsystemLayout((2,), ("S",)))


def _model_channel(cfg: RunConfig) -> channels.KrausChannel:
    p = cfg.params
    model, n = p["model"], p.get("n", 1)
    if model == "spam":
        return models.spam_interaction(n, cfg.budget_qubits)
    if model == "partial-record":
        return models.partial_record_interaction(n, p["theta"], cfg.budget_qubits)
    if model == "random":
        return models.random_interaction(n, p["depth"], darwin.derive_seed(cfg.seed, n, 0), cfg.budget_qubits)
    if model == "identity":
        return channels.identity_channel(SubsystemLayout((2,), ("S",)))
    return channels.depolarizing_channel()


def _cmd_mach_zehnder(cfg: RunConfig):
    header = ["detector", "gamma", "p_A", "p_B", "visibility"]
    rows = []
    for gamma in cfg["gamma"]:
        res = models.mach_zehnder(cfg["detector"] == "on", gamma)
        rows.append([cfg["detector"], gamma, res.p_detector_A, res.p_detector_B, res.visibility])
    return header, rows


def _cmd_eraser(cfg: RunConfig):
    header = ["outcome", "postselection_probability", "p_A", "p_B"]
    outcomes = ["plus", "minus"] if cfg["outcome"] == "both" else [cfg["outcome"]]
    results = {o: models.erase_and_postselect(o) for o in outcomes}
    rows = [[o, r.postselection_probability, r.p_detector_A, r.p_detector_B] for o, r in results.items()]
    if len(results) == 2:
        p_a = sum(r.postselection_probability * r.p_detector_A for r in results.values())
        rows.append(["mixture", 1.0, p_a, 1.0 - p_a])
    return header, rows


def _cmd_cat(cfg: RunConfig):
    header = ["n_env", "gamma", "p_dead", "p_alive", "coherence", "closed_form_coherence"]
    rows = []
    for gamma in cfg["gamma"]:
        rho = models.cat_photon(cfg["n_env"], gamma, cfg.budget_qubits).entries
        rows.append([cfg["n_env"], gamma, rho[0, 0].real, rho[1, 1].real, abs(rho[0, 1]), 0.5 * gamma ** cfg["n_env"]])
    return header, rows


def _cmd_spam(cfg: RunConfig):
    header = ["n", "alpha", "fragment", "rho_00", "rho_11", "rho_01_abs", "p_plus", "p_minus", "max_pairwise_distance"]
    ch = models.spam_interaction(cfg["n"], cfg.budget_qubits)
    marginals = models.fragment_marginals(ch, _alpha_state(cfg["alpha"]).density())
    worst = darwin.fragment_distances(marginals)
    plus_minus = channels.Povm.from_basis([models.named_state("plus"), models.named_state("minus")])
    rows = []
    for j, rho in enumerate(marginals, 1):
        p = povm_probabilities(rho, plus_minus)
        e = rho.entries
        rows.append([cfg["n"], cfg["alpha"], j, e[0, 0].real, e[1, 1].real, abs(e[0, 1]), p[0], p[1], worst])
    return header, rows


def _cmd_partial_record(cfg: RunConfig):
    header = ["n", "theta", "fragment", "fragment_distinguishability", "record_overlap", "system_coherence", "closed_form_coherence"]
    n, theta = cfg["n"], cfg["theta"]
    ch = models.partial_record_interaction(n, theta, cfg.budget_qubits)
    sys_state = channels.restrict_to_fragment(ch, 0)(models.named_state("right").density())
    coherence = abs(sys_state.entries[0, 1])
    up = models.fragment_marginals(ch, models.named_state("up").density())
    down = models.fragment_marginals(ch, models.named_state("down").density())
    rows = []
    for j in range(n):
        rows.append([n, theta, j + 1, trace_distance(up[j], down[j]), math.cos(theta / 2), coherence, 0.5 * math.cos(theta / 2) ** n])
    return header, rows


def _cmd_pointer_sieve(cfg: RunConfig):
    header = ["model", "x", "y", "z", "purity", "is_argmax"]
    res = darwin.pointer_sieve(_model_channel(cfg), cfg["resolution"])
    best = res.max_purity
    rows = [[cfg["model"], *v, p, p >= best - 1e-9] for v, p in zip(res.directions, res.purities)]
    return header, rows


def _cmd_info_curve(cfg: RunConfig):
    header = ["model", "n", "m", "mutual_information_bits", "samples", "stderr", "system_entropy_bits", "delta", "redundancy"]
    ch = _model_channel(cfg)
    state = ch(_alpha_state(cfg["alpha"]).density())
    curve = darwin.fragment_information_curve(state, 0, seed=cfg.seed)
    try:
        red = darwin.redundancy(curve, cfg["delta"])
    except ValueError:
        red = 0.0  # threshold never reached

    return header, [
        [cfg["model"], cfg["n"], p.m, p.mean_information, p.samples, p.stderr, curve.system_entropy, cfg["delta"], red]
        for p in curve.points
    ]


def _cmd_mp_fit(cfg: RunConfig):
    header = ["model", "n", "j", "negativity", "ppt_exact", "mp_distance", "outcomes", "basis_x", "basis_y", "basis_z", "sigma_fidelity"]
    ch = _model_channel(cfg)
    lam = ch if len(ch.out_layout) == 1 else channels.restrict_to_fragment(ch, cfg["j"])
    spec, dist = darwin.mp_fit(lam, cfg["resolution"])
    if len(spec.povm) == 2:
        m0 = spec.povm.elements[0].entries
        bloch = [2 * m0[1, 0].real, 2 * m0[1, 0].imag, (m0[0, 0] - m0[1, 1]).real]
        fid = fidelity(*spec.prepared)
    else:
        bloch, fid = [0.0, 0.0, 0.0], 1.0
    n = cfg["n"] if len(ch.out_layout) > 1 else 0
    return header, [[cfg["model"], n, cfg["j"], channels.eb_negativity(lam), channels.ppt_is_exact(lam), dist, len(spec.povm), *bloch, fid]]


def _cmd_emergence(cfg: RunConfig):
    p = cfg.params
    rows = darwin.emergence_scan(
        range(p["n_min"], p["n_max"] + 1),
        p["seeds"],
        depth=p["depth"],
        master_seed=cfg.seed,
        family=p["family"],
        resolution=p["resolution"],
        jobs=cfg.jobs,
        budget_qubits=cfg.budget_qubits,
    )
    if p["rows"] == "full":
        header = ["n", "j", "seed", "negativity", "mp_distance", "sigma_fidelity", "ppt_exact"]
        return header, [[r.n, r.j, r.seed, r.negativity, r.mp_distance, r.sigma_fidelity, r.ppt_exact] for r in rows]
    header = ["n", "rows", "median_negativity", "max_negativity", "median_mp_distance", "max_mp_distance"]
    return header, [
        [s.n, s.rows, s.median_negativity, s.max_negativity, s.median_mp_distance, s.max_mp_distance]
        for s in darwin.summarize_emergence(rows)
    ]


RUNNERS = {
    "mach-zehnder": _cmd_mach_zehnder,
    "eraser": _cmd_eraser,
    "cat": _cmd_cat,
    "spam": _cmd_spam,
    "partial-record": _cmd_partial_record,
    "pointer-sieve": _cmd_pointer_sieve,
    "info-curve": _cmd_info_curve,
    "mp-fit": _cmd_mp_fit,
    "emergence": _cmd_emergence,
}


def run_table(cfg: RunConfig) -> tuple[list[str], list[list[Any]]]:
    header, rows = RUNNERS[cfg.command](cfg)
    for row in rows:
        if len(row) != len(header):
            raise InvariantViolation(f"row has {len(row)} fields, header has {len(header)}")
        for value in row:
            if isinstance(value, (float, np.floating)) and not math.isfinite(value):
                raise InvariantViolation(f"non-finite value in {cfg.command} output")
    return header, rows


def run(cfg: RunConfig) -> str:
    """Execute a scenario; returns the CSV text and writes it to ``cfg.output`` when set."""
    header, rows = run_table(cfg)
    buf = io.StringIO()
    write_csv(header, rows, buf)
    text = buf.getvalue()
    if cfg.output:
        Path(cfg.output).write_text(text)
    return text


# -- plot scripts ----------------------------------------------------------

_PLOT_BODY = {
    "mach-zehnder": """\
x = [float(r["gamma"]) for r in rows]
ax.plot(x, [float(r["p_A"]) for r in rows], "o-", label="P(A)")
ax.plot(x, [(1 - g) / 2 for g in x], "k:", label="(1 - gamma) / 2")
ax.set_xlabel("record overlap gamma")
ax.set_ylabel("detection probability")
""",
    "cat": """\
x = [float(r["gamma"]) for r in rows]
ax.semilogy(x, [max(float(r["coherence"]), 1e-300) for r in rows], "o-", label="coherence")
ax.semilogy(x, [max(float(r["closed_form_coherence"]), 1e-300) for r in rows], "k:", label="gamma^n / 2")
ax.set_xlabel("record overlap gamma")
ax.set_ylabel("|rho_dead,alive|")
""",
    "info-curve": """\
x = [int(r["m"]) for r in rows]
y = [float(r["mutual_information_bits"]) for r in rows]
err = [float(r["stderr"]) for r in rows]
ax.errorbar(x, y, yerr=err, fmt="o-", label="I(S : F_m)")
s = float(rows[0]["system_entropy_bits"])
ax.axhline(s, color="k", ls=":", label="S(system)")
ax.axhline(2 * s, color="k", ls="--", lw=0.8)
ax.set_xlabel("fragment size m")
ax.set_ylabel("mutual information (bits)")
""",
    "emergence": """\
if "median_negativity" in rows[0]:
    x = [int(r["n"]) for r in rows]
    med = [float(r["median_negativity"]) for r in rows]
    top = [float(r["max_negativity"]) for r in rows]
    ax.fill_between(x, med, top, alpha=0.3, label="median to max")
    ax.plot(x, med, "o-", label="median negativity")
else:
    by_n = {}
    for r in rows:
        by_n.setdefault(int(r["n"]), []).append(float(r["negativity"]))
    x = sorted(by_n)
    q = lambda v, f: sorted(v)[min(len(v) - 1, int(f * len(v)))]
    ax.fill_between(x, [q(by_n[n], 0.25) for n in x], [q(by_n[n], 0.75) for n in x], alpha=0.3, label="interquartile")
    ax.plot(x, [q(by_n[n], 0.5) for n in x], "o-", label="median negativity")
ax.set_xlabel("number of fragments n")
ax.set_ylabel("Choi negativity of fragment channel")
""",
    "pointer-sieve": """\
z = [float(r["z"]) for r in rows]
ax.plot(z, [float(r["purity"]) for r in rows], "o", label="post-interaction purity")
ax.set_xlabel("Bloch z of input state")
ax.set_ylabel("system purity")
""",
}

_PLOT_TEMPLATE = '''\
"""Plot {kind} results from {csv_name}."""
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = Path(__file__).with_name("{csv_name}")
with CSV.open() as fh:
    rows = list(csv.DictReader(fh))

fig, ax = plt.subplots(figsize=(5, 3.5))
{body}ax.legend()
fig.tight_layout()
fig.savefig(CSV.with_suffix(".png"), dpi=150)
'''


def emit_plot_script(csv_path: str | Path, kind: str, script_path: str | Path | None = None) -> Path:
    """Write a matplotlib script drawing the canonical figure for ``kind`` next to the CSV."""
    if kind not in _PLOT_BODY:
        raise ConfigError(f"no plot for {kind!r}; choose from {', '.join(sorted(_PLOT_BODY))}")
    csv_path = Path(csv_path)
    text = csv_path.read_text() if csv_path.exists() else ""
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 2:
        raise ConfigError(f"{csv_path} has no data rows")
    script_path = Path(script_path) if script_path else csv_path.with_name(f"plot_{csv_path.stem}.py")
    script_path.write_text(_PLOT_TEMPLATE.format(kind=kind, csv_name=csv_path.name, body=_PLOT_BODY[kind]))
    return script_path


# -- entry point -----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdarwin", description="Decoherence and quantum Darwinism scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, info in COMMANDS.items():
        p = sub.add_parser(name, help=info["help"])
        p.add_argument("--config", help="key = value file; flags override it")
        for key, spec in list(COMMON.items()) + [(k, PARAMS[k]) for k in info["params"]]:
            flag = "--" + key.replace("_", "-")
            if spec.parse is _bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=spec.help)
            else:
                p.add_argument(flag, dest=key, default=None, help=f"{spec.help} (default {_render(spec.default)})")
    plot = sub.add_parser("plot-script", help="write a plotting script for a CSV produced by another command")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--kind", required=True)
    plot.add_argument("--output", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plot-script":
            print(emit_plot_script(args.csv, args.kind, args.output))
            return EXIT_OK
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        cfg = parse_config(args.command, flags, args.config)
        print("\n".join("# " + line for line in cfg.lines()), file=sys.stderr)
        if cfg.command == "selftest":
            from .acceptance import run_suite

            results = run_suite(quick=cfg["quick"], stream=sys.stdout)
            return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL
        text = run(cfg)
        if not cfg.output:
            sys.stdout.write(text)
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
