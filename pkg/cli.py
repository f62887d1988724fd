"""Command line front end for setrograde databases.

Usage examples:
  python cli.py build --cards 12 --suit-mode single --trump NT --leader E --engine both
  python cli.py query "N:98... E:54... S:76... W:32..." --leader E --trump NT
  python cli.py validate --cards 8 --against retro --mode exhaustive
  python cli.py stats --xlsx stats.xlsx
  python cli.py shapes --cards 8
"""
import json
import logging
import random
import sys
from argparse import ArgumentParser
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from setrograde.config import load_settings
from setrograde.core import (
    PLAY_ORDER,
    Player,
    Shape,
    Trump,
    PartitionKey,
    absolute_state_count,
    canonical_state_count,
    enumerate_shapes,
    format_deal,
    iter_deals,
    parse_deal,
    random_deal,
    shape_classes,
)
from setrograde.errors import FormatError, MalformedDealError, MissingPartitionError, ValidationMismatch
from setrograde.report import build_frame, stats_frame, write_excel, write_pdf
from setrograde.retro import RetroStore, build_retro_depth
from setrograde.rules import minimax_value
from setrograde.setdb import SetStore, lookup_state, stats
from setrograde.setro import build_depth, read_report, required_partitions

try:
    import sentry_sdk
except Exception:
    sentry_sdk = None

logger = logging.getLogger("setrograde.cli")

EXIT_OK = 0
EXIT_MISMATCH = 2
EXIT_MISSING = 3
EXIT_FORMAT = 4


def _parser() -> ArgumentParser:
    parser = ArgumentParser(prog="setrograde")
    parser.add_argument("--db", help="Database root (default: $SETROGRADE_DB_ROOT or ./databases)")
    parser.add_argument("--json", action="store_true", help="Machine-readable output")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", action="store_true", help="Warnings only")
    sub = parser.add_subparsers(dest="cmd")

    p_build = sub.add_parser("build", help="Build databases bottom-up")
    p_build.add_argument("--cards", type=int, required=True, help="Cards in play (multiple of 4)")
    p_build.add_argument("--suit-mode", choices=["single", "full"], default="single")
    p_build.add_argument("--trump", default="NT", help="NT, S, H, D, C or all")
    p_build.add_argument("--leader", default="E", help="N, E, S, W or all")
    p_build.add_argument("--engine", choices=["retro", "setro", "both"], default="setro")
    p_build.add_argument("--debug-sweep", action="store_true", help="Check every deal is covered after each build")
    p_build.add_argument("--setwise", action="store_true", help="Verify sets by set-level play where possible")
    p_build.add_argument("--workers", type=int, help="Parallel partition builds (default: $SETROGRADE_WORKERS)")

    p_query = sub.add_parser("query", help="Look up the NS trick count of a deal")
    p_query.add_argument("deal", help='e.g. "N:98... E:54... S:76... W:32... leader=E trump=NT"')
    p_query.add_argument("--leader", choices=[p.name for p in PLAY_ORDER])
    p_query.add_argument("--trump", choices=[t.name for t in Trump])
    p_query.add_argument("--engine", choices=["retro", "setro"], default="setro")

    p_validate = sub.add_parser("validate", help="Compare set databases with another evaluator")
    p_validate.add_argument("--against", choices=["retro", "minimax"], default="retro")
    p_validate.add_argument("--mode", choices=["exhaustive", "samples"], default="exhaustive")
    p_validate.add_argument("--samples", type=int, default=1000, help="Deals per partition in samples mode")
    p_validate.add_argument("--seed", type=int, default=0)
    p_validate.add_argument("--cards", type=int, help="Only partitions with this many cards")

    p_stats = sub.add_parser("stats", help="Size and coverage of the set databases")
    p_stats.add_argument("--cards", type=int, help="Only partitions with this many cards")
    p_stats.add_argument("--xlsx", help="Also write the table to this Excel file")
    p_stats.add_argument("--pdf", help="Also write the table to this PDF file")

    p_shapes = sub.add_parser("shapes", help="Count shapes and states for a card count")
    p_shapes.add_argument("--cards", type=int, required=True)
    return parser


def _choices(value: str, members: Sequence, option: str) -> List:
    if value == "all":
        return list(members)
    by_name = {m.name: m for m in members}
    if value not in by_name:
        raise MalformedDealError(f"{option} must be one of {', '.join(by_name)} or all, got {value!r}")
    return [by_name[value]]


def cmd_build(args, settings) -> int:
    if args.cards % 4 or not 4 <= args.cards <= 52:
        raise MalformedDealError(f"--cards must be a multiple of 4 between 4 and 52, got {args.cards}")
    d = args.cards // 4
    if args.suit_mode == "single":
        if args.cards > 13:
            raise MalformedDealError(f"a single suit holds at most 13 cards, got {args.cards}")
        shapes = [Shape.single_suit(d)]
    else:
        shapes = enumerate_shapes(args.cards)
    trumps = _choices(args.trump, list(Trump), "--trump")
    leaders = _choices(args.leader, PLAY_ORDER, "--leader")
    top = [PartitionKey(shape, leader, trump) for shape in shapes for trump in trumps for leader in leaders]
    plan = required_partitions(top)
    workers = args.workers or settings.workers
    set_store, retro_store = SetStore(settings.db_root), RetroStore(settings.db_root)

    rows = []
    for depth in sorted(plan):
        keys = plan[depth]
        logger.info(f"Depth {depth}: {len(keys)} partitions")
        if args.engine in ("setro", "both"):
            for report in build_depth(keys, set_store, workers, args.debug_sweep, args.setwise):
                rows.append({
                    "Partition": report.partition, "Engine": "setro", "Generated": report.generated,
                    "Independent": report.independent, "Duplicate": report.duplicate,
                    "Entries Before": report.entries_before, "Entries After": report.entries_after,
                    "Oracle Queries": report.oracle_queries, "Max Open List": report.max_open_list,
                    "Seconds": round(report.elapsed, 3),
                })
        if args.engine in ("retro", "both"):
            for key, seconds in build_retro_depth(keys, retro_store, workers).items():
                rows.append({"Partition": key.label, "Engine": "retro", "Seconds": round(seconds, 3)})
        if args.engine == "both":
            for key in keys:
                checked = _compare(key, set_store, retro_store.lookup, None, None)
                logger.info(f"Retro and setro agree on {checked} deals of {key.label}")

    df = build_frame(rows)
    if args.json:
        # retro rows leave the search columns empty: null, never NaN
        records = df.astype(object).where(df.notna(), None).to_dict(orient="records")
        print(json.dumps(records, default=str, allow_nan=False, indent=2))
    elif df.empty:
        print("Nothing to build; all partitions exist.")
    else:
        print(df.fillna("").to_string(index=False))
    return EXIT_OK


def _compare(key: PartitionKey, store: SetStore, reference, samples: Optional[int], rng) -> int:
    tree = store.get(key)
    if samples is None:
        deals = iter_deals(key.shape, key.leader, key.trump)
    else:
        deals = (random_deal(key.shape, key.leader, key.trump, rng) for _ in range(samples))
    checked = 0
    for deal in deals:
        got, expected = lookup_state(tree, deal), reference(deal)
        if got != expected:
            raise ValidationMismatch(f"{format_deal(deal)}: set database says {got}, reference says {expected}", deal)
        checked += 1
    return checked


def cmd_query(args, settings) -> int:
    leader = Player[args.leader] if args.leader else None
    trump = Trump[args.trump] if args.trump else None
    deal = parse_deal(args.deal, leader, trump)
    if args.engine == "retro":
        value = RetroStore(settings.db_root).lookup(deal)
    else:
        value = lookup_state(SetStore(settings.db_root).get(deal.partition), deal)
        if value is None:
            raise MissingPartitionError(f"{format_deal(deal)} is not covered by {deal.partition.label}", deal.partition)
    if args.json:
        print(json.dumps({"deal": format_deal(deal), "partition": deal.partition.label, "ns_tricks": value}))
    else:
        print(value)
    return EXIT_OK


def cmd_validate(args, settings) -> int:
    store = SetStore(settings.db_root)
    keys = store.keys(args.cards)
    if args.against == "retro":
        retro_store = RetroStore(settings.db_root)
        reference = retro_store.lookup
    else:
        reference = minimax_value
    samples = args.samples if args.mode == "samples" else None
    if samples == 0:
        logger.warning("No samples requested; validation passes vacuously")
    rng = random.Random(args.seed)
    results = []
    for key in keys:
        checked = _compare(key, store, reference, samples, rng)
        results.append({"partition": key.label, "checked": checked, "mismatches": 0})
        logger.info(f"Validated {checked} deals of {key.label} against {args.against}")
    total = sum(r["checked"] for r in results)
    if args.json:
        print(json.dumps({"against": args.against, "seed": args.seed, "partitions": results, "checked": total}, indent=2))
    else:
        print(f"{total} deals in {len(results)} partitions agree with {args.against} (seed {args.seed})")
    return EXIT_OK


def cmd_stats(args, settings) -> int:
    store = SetStore(settings.db_root)
    rows = []
    for key in store.keys(args.cards):
        row: Dict[str, object] = dict(stats(store.get(key), settings.exact_count_limit))
        report = read_report(store, key)
        row.update(cards=key.cards, partition=key.label, elapsed=report.elapsed if report else 0.0)
        rows.append(row)
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    df = stats_frame(rows)
    if df.empty:
        print("No set databases found.")
    else:
        print(df.to_string(index=False))
    if args.xlsx:
        write_excel(df, args.xlsx)
    if args.pdf:
        write_pdf(df, args.pdf)
    return EXIT_OK


def cmd_shapes(args, settings) -> int:
    counts = {
        "cards": args.cards,
        "shapes": len(enumerate_shapes(args.cards)),
        "shape_classes": len(shape_classes(args.cards)),
        "absolute_states": absolute_state_count(args.cards),
        "canonical_states": canonical_state_count(args.cards),
    }
    if args.json:
        print(json.dumps(counts, indent=2))
    else:
        for name, value in counts.items():
            print(f"{name}: {value:,}")
    return EXIT_OK


COMMANDS = {
    "build": cmd_build,
    "query": cmd_query,
    "validate": cmd_validate,
    "stats": cmd_stats,
    "shapes": cmd_shapes,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.cmd is None:
        parser.print_help()
        return EXIT_OK

    settings = load_settings()
    if args.db:
        settings = replace(settings, db_root=Path(args.db))
    if settings.sentry_dsn and sentry_sdk is not None:
        sentry_sdk.init(dsn=settings.sentry_dsn)

    try:
        return COMMANDS[args.cmd](args, settings)
    except ValidationMismatch as e:
        logger.error(f"Validation failed: {e}")
        return EXIT_MISMATCH
    except MissingPartitionError as e:
        hint = ""
        if e.partition is not None and getattr(e.partition, "d", 0) > 0:
            hint = f"; build {e.partition.cards}-card databases first"
        logger.error(f"Missing database: {e}{hint}")
        return EXIT_MISSING
    except (MalformedDealError, FormatError) as e:
        logger.error(f"{e}")
        return EXIT_FORMAT
    except Exception as e:
        if sentry_sdk is not None and settings.sentry_dsn:
            sentry_sdk.capture_exception(e)
        raise


if __name__ == "__main__":
    sys.exit(main())
