"""Entry Point fuer neurodyn."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from datetime import datetime
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.logging import RichHandler
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from neurodyn import __version__
from neurodyn.errors import EndpointUnavailableError, NonFiniteLossError, UnsupportedProblemError, UsageError
from neurodyn.i18n import SUPPORTED_LANGUAGES, load_locale, t
from neurodyn.models.config import load_config_file, merge_step_control, merge_train_config
from neurodyn.models.history import History, HistoryEntry
from neurodyn.models.run_result import HistoryRow, RunSummary
from neurodyn.models.settings import Settings
from neurodyn.services import commands
from neurodyn.services.benchmarks import list_examples, load_example, resolve_key

logger = logging.getLogger("neurodyn")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

console = Console()
err_console = Console(stderr=True)


def _preparse_lang(argv: Sequence[str], default: str) -> str:
    """Liest --lang vor argparse, damit Hilfetexte uebersetzt sind."""
    for i, arg in enumerate(argv):
        if arg == "--lang" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--lang="):
            return arg.split("=", 1)[1]
    return default


def _setup_logging(verbose: bool) -> None:
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    root.addHandler(RichHandler(console=err_console, show_path=False, rich_tracebacks=False))
    root.setLevel(logging.INFO if verbose else logging.WARNING)


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--example", "-e", default=None, metavar="ID", help=t("cli.example_help"))
    p.add_argument("--config", default=None, metavar="FILE", help=t("cli.config_help"))
    p.add_argument("--out-dir", "-o", default=None, metavar="DIR", help=t("cli.out_dir_help"))
    p.add_argument("--t-final", type=float, default=None, metavar="T", help=t("cli.t_final_help"))


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=int, default=None, metavar="N", help=t("cli.iters_help"))
    p.add_argument("--batch", type=int, default=None, metavar="N", help=t("cli.batch_help"))
    p.add_argument("--lr", type=float, default=None, help=t("cli.lr_help"))
    p.add_argument("--gamma", type=float, default=None, help=t("cli.gamma_help"))
    p.add_argument("--hidden", type=int, default=None, metavar="N", help=t("cli.hidden_help"))
    p.add_argument("--cadence", type=int, default=None, metavar="N", help=t("cli.cadence_help"))
    p.add_argument("--alpha", type=float, default=None, help=t("cli.alpha_help"))
    p.add_argument("--no-wall-clock", action="store_true", default=False, help=t("cli.no_wall_clock_help"))


def build_parser(lang: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurodyn",
        description=t("cli.banner", version=__version__),
        epilog=t("cli.examples"),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"neurodyn {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true", default=False, help=t("cli.verbose_help"))
    parser.add_argument("--lang", default=lang, choices=list(SUPPORTED_LANGUAGES), help="Sprache / Language (de, en)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p_list = sub.add_parser("list", help=t("cli.list_help"))
    p_list.add_argument("--json", action="store_true", default=False, help=t("cli.json_help"))

    p_train = sub.add_parser("train", help=t("cli.train_help"))
    _add_run_options(p_train)
    _add_train_options(p_train)
    p_train.add_argument("--seed", type=int, default=None, help=t("cli.seed_help"))
    p_train.add_argument("--y0", default=None, metavar="VECTOR", help=t("cli.y0_help"))

    p_int = sub.add_parser("integrate", help=t("cli.integrate_help"))
    _add_run_options(p_int)
    p_int.add_argument("--method", "-m", default=None, help=t("cli.method_help"))
    p_int.add_argument("--step", type=float, default=None, metavar="H", help=t("cli.step_help"))
    p_int.add_argument("--rtol", type=float, default=None, help=t("cli.rtol_help"))
    p_int.add_argument("--atol", type=float, default=None, help=t("cli.atol_help"))
    p_int.add_argument("--min-step", type=float, default=None, help=t("cli.min_step_help"))
    p_int.add_argument("--max-step", type=float, default=None, help=t("cli.max_step_help"))
    p_int.add_argument("--max-steps", type=int, default=None, help=t("cli.max_steps_help"))
    p_int.add_argument("--stride", type=int, default=None, metavar="K", help=t("cli.stride_help"))
    p_int.add_argument("--y0", default=None, metavar="VECTOR", help=t("cli.y0_help"))

    p_cmp = sub.add_parser("compare", help=t("cli.compare_help"))
    _add_run_options(p_cmp)
    _add_train_options(p_cmp)
    p_cmp.add_argument("--seeds", type=int, nargs="*", default=None, metavar="SEED", help=t("cli.seeds_help"))
    p_cmp.add_argument("--step", type=float, default=None, metavar="H", help=t("cli.step_help"))
    p_cmp.add_argument("--method", "-m", default=None, help=t("cli.method_help"))
    p_cmp.add_argument("--jobs", "-j", type=int, default=None, metavar="N", help=t("cli.jobs_help"))

    p_sweep = sub.add_parser("sweep", help=t("cli.sweep_help"))
    _add_run_options(p_sweep)
    _add_train_options(p_sweep)
    p_sweep.add_argument("--seed", type=int, default=None, help=t("cli.seed_help"))
    p_sweep.add_argument("--axis", required=True, choices=list(commands.SWEEP_AXES), help=t("cli.axis_help"))
    p_sweep.add_argument("--values", nargs="*", default=None, metavar="VALUE", help=t("cli.values_help"))
    p_sweep.add_argument("--jobs", "-j", type=int, default=None, metavar="N", help=t("cli.jobs_help"))

    p_hist = sub.add_parser("history", help=t("cli.history_help"))
    p_hist.add_argument("--limit", type=int, default=10, metavar="N", help=t("cli.limit_help"))
    return parser


# --- Konfiguration aus Flags und Datei ---


def _document(args: argparse.Namespace) -> dict[str, Any]:
    return load_config_file(Path(args.config)) if args.config else {}


def _example_key(args: argparse.Namespace, document: dict[str, Any]) -> int | str:
    key = args.example if args.example is not None else document.get("example")
    if key is None:
        raise UsageError(t("cli.example_missing"))
    return key


def _wall_clock(args: argparse.Namespace, document: dict[str, Any]) -> bool:
    """``--no-wall-clock`` oder ``"wall_clock": false`` aus einer summary.json schaltet die Laufzeit ab."""
    return not args.no_wall_clock and bool(document.get("wall_clock", True))


def _train_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "max_iter": args.iters,
        "batch_size": args.batch,
        "lr": args.lr,
        "gamma": args.gamma,
        "hidden": args.hidden,
        "cadence": args.cadence,
        "alpha": args.alpha,
        "horizon": args.t_final,
        "seed": getattr(args, "seed", None),
    }


def _y0(args: argparse.Namespace, document: dict[str, Any], n: int) -> Any:
    if args.y0 is not None:
        return commands.parse_vector(args.y0, n)
    if "y0" in document:
        return commands.parse_vector(json.dumps(document["y0"]), n)
    return None


def _out_dir(args: argparse.Namespace, settings: Settings, example: int) -> Path:
    """``--out-dir`` gilt direkt, sonst ein Unterordner mit Zeitstempel im Standardverzeichnis."""
    if args.out_dir:
        return Path(args.out_dir)
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    return settings.resolve_output_dir() / f"{args.command}-ex{example}-{stamp}"


# --- Ausgabe ---


def _print_summary(summary: RunSummary, out_dir: Path) -> None:
    table = Table(show_header=False, box=None)
    table.add_row(t("summary.example"), str(summary.example))
    table.add_row(t("summary.status"), summary.status)
    if summary.epsilon is not None:
        table.add_row(t("summary.epsilon"), f"{summary.epsilon:.6g}")
    if summary.best_solution:
        table.add_row(t("summary.solution"), "[" + ", ".join(f"{v:.4f}" for v in summary.best_solution) + "]")
    table.add_row(t("summary.wall"), f"{summary.wall_ms / 1000.0:.2f} s")
    table.add_row(t("summary.out_dir"), str(out_dir))
    console.print(table)


def _record(summary: RunSummary, out_dir: Path) -> None:
    History.add(
        HistoryEntry(
            command=summary.command,
            example=summary.example,
            status=summary.status,
            epsilon=summary.epsilon,
            out_dir=str(out_dir),
            config=summary.config,
        )
    )


def _log(message: str) -> None:
    console.print(message, highlight=False)


def _progress_callback(progress: Progress, total: int) -> Callable[[HistoryRow], None]:
    task = progress.add_task(t("train.progress_label"), total=total)

    def on_row(row: HistoryRow) -> None:
        progress.update(task, completed=row.iteration)

    return on_row


# --- Unterbefehle ---


def _run_list(args: argparse.Namespace) -> int:
    examples = list_examples()
    if args.json:
        print(json.dumps(examples, indent=2, ensure_ascii=False))
        return EXIT_OK
    table = Table(title=t("list.title"))
    for column in ("id", "name", "n", "epsilon", "reference"):
        table.add_column(t(f"list.{column}"))
    for item in examples:
        table.add_row(
            str(item["id"]),
            item["name"],
            str(item["n"]),
            item["epsilon_kind"],
            "[" + ", ".join(f"{v:.2f}" for v in item["reference"]) + "]",
        )
    console.print(table)
    return EXIT_OK


def _run_train(args: argparse.Namespace, settings: Settings) -> int:
    document = _document(args)
    key = resolve_key(_example_key(args, document))
    inst = load_example(key)
    cfg = merge_train_config(document, _train_overrides(args))
    y0 = _y0(args, document, inst.n)
    out_dir = _out_dir(args, settings, inst.id)
    with Progress(
        TextColumn("{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        summary = commands.cmd_train(
            key,
            cfg,
            out_dir,
            y0=y0,
            wall_clock=_wall_clock(args, document),
            on_row=_progress_callback(progress, cfg.max_iter),
            log=_log,
        )
    _record(summary, out_dir)
    _print_summary(summary, out_dir)
    return EXIT_OK


def _run_integrate(args: argparse.Namespace, settings: Settings) -> int:
    document = _document(args)
    key = resolve_key(_example_key(args, document))
    inst = load_example(key)
    ctrl = merge_step_control(
        document,
        {
            "rtol": args.rtol,
            "atol": args.atol,
            "min_step": args.min_step,
            "max_step": args.max_step,
            "max_steps": args.max_steps,
        },
    )
    method = args.method or document.get("method") or "rk45"
    step = args.step if args.step is not None else document.get("step")
    t_final = args.t_final if args.t_final is not None else document.get("t_final")
    stride = args.stride if args.stride is not None else document.get("stride")
    if stride is not None:
        stride = int(stride)
    out_dir = _out_dir(args, settings, inst.id)
    summary = commands.cmd_integrate(
        key,
        method,
        out_dir,
        step=step,
        ctrl=ctrl,
        t_final=t_final,
        y0=_y0(args, document, inst.n),
        stride=stride,
        log=_log,
    )
    _record(summary, out_dir)
    _print_summary(summary, out_dir)
    if summary.status == commands.FAIL_STATUS:
        err_console.print(t("integrate.failed", status=summary.extra.get("trajectory_status", "")))
        return EXIT_NUMERICAL
    return EXIT_OK


def _run_compare(args: argparse.Namespace, settings: Settings) -> int:
    document = _document(args)
    key = resolve_key(_example_key(args, document))
    inst = load_example(key)
    cfg = merge_train_config(document, _train_overrides(args))
    seeds = args.seeds if args.seeds is not None else list(document.get("seeds", [0, 1, 2]))
    out_dir = _out_dir(args, settings, inst.id)
    summary = commands.cmd_compare(
        key,
        seeds,
        cfg,
        out_dir,
        step=args.step if args.step is not None else float(document.get("step", commands.DEFAULT_STEP)),
        method=args.method or document.get("method") or "rk4",
        jobs=args.jobs or 1,
        wall_clock=_wall_clock(args, document),
        log=_log,
    )
    _record(summary, out_dir)
    _print_summary(summary, out_dir)
    return EXIT_OK


def _run_sweep(args: argparse.Namespace, settings: Settings) -> int:
    document = _document(args)
    key = resolve_key(_example_key(args, document))
    inst = load_example(key)
    cfg = merge_train_config(document, _train_overrides(args))
    values = args.values if args.values is not None else list(document.get("values", []))
    out_dir = _out_dir(args, settings, inst.id)
    summary = commands.cmd_sweep(
        key,
        args.axis,
        values,
        cfg,
        out_dir,
        jobs=args.jobs or 1,
        wall_clock=_wall_clock(args, document),
        log=_log,
    )
    _record(summary, out_dir)
    _print_summary(summary, out_dir)
    return EXIT_OK


def _run_history(args: argparse.Namespace) -> int:
    entries = History.load()[: max(0, args.limit)]
    if not entries:
        console.print(t("history.empty"))
        return EXIT_OK
    table = Table(title=t("history.title"))
    table.add_column(t("history.run"))
    table.add_column(t("history.out_dir"))
    for entry in entries:
        table.add_row(entry.display_label(), entry.out_dir)
    console.print(table)
    return EXIT_OK


def run(argv: Sequence[str] | None = None) -> int:
    """Fuehrt die CLI aus und liefert den Exit-Code (0 ok, 2 Bedienfehler, 3 numerischer Abbruch)."""
    argv = list(sys.argv[1:] if argv is None else argv)
    settings = Settings.load()

    lang = _preparse_lang(argv, settings.language)
    load_locale(lang)
    if lang != settings.language and lang in SUPPORTED_LANGUAGES:
        settings.language = lang
        settings.save()

    parser = build_parser(lang)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE

    _setup_logging(args.verbose)

    try:
        if args.command == "list":
            return _run_list(args)
        if args.command == "history":
            return _run_history(args)
        handlers = {
            "train": _run_train,
            "integrate": _run_integrate,
            "compare": _run_compare,
            "sweep": _run_sweep,
        }
        return handlers[args.command](args, settings)
    except (UsageError, UnsupportedProblemError) as exc:
        err_console.print(t("cli.usage_error", error=str(exc)), highlight=False)
        return EXIT_USAGE
    except NonFiniteLossError as exc:
        err_console.print(t("cli.non_finite", iteration=exc.iteration, norm=f"{exc.param_norm:.6g}"), highlight=False)
        return EXIT_NUMERICAL
    except EndpointUnavailableError as exc:
        err_console.print(t("cli.numerical_error", error=str(exc)), highlight=False)
        return EXIT_NUMERICAL


def main() -> None:
    """Haupteinstiegspunkt fuer die CLI."""
    sys.exit(run())


if __name__ == "__main__":
    main()
