#!/usr/bin/env python3
"""
advlab - Benign overfitting vs. adversarial risk lab
Experiment CLI: repro / sweep / conditions / ntk-sweep / export-design
"""

import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from advlab.commands.config import ExperimentConfig, Scenario, load_config, preset
from advlab.commands.runner import ExperimentRunner
from advlab.models.errors import AdvlabError, ConfigError

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def configure_logging() -> None:
    logging.basicConfig(
        level=os.getenv('ADVLAB_LOG_LEVEL', 'INFO').upper(),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.getenv('ADVLAB_LOG_FILE', 'advlab.log')),
            logging.StreamHandler(sys.stdout)
        ]
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='advlab', description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
        if needs_config:
            p.add_argument('--config', required=True, type=Path, help='key-value experiment config')
        p.add_argument('--output', type=Path, help='output CSV path (overrides OUTPUT)')
        p.add_argument('--workers', type=int, help='worker pool size (overrides ADVLAB_WORKERS)')
        p.add_argument('--seed', type=int, help='master seed (overrides MASTER_SEED)')
        p.add_argument('--strict', action='store_true', help='exit 3 if any grid point failed numerically')

    repro = sub.add_parser('repro', help='reproduce a builtin scenario')
    repro.add_argument('scenario', choices=[s.value for s in Scenario])
    common(repro, needs_config=False)

    for name, text in (('sweep', 'risk / bound sweep over n and λ'),
                       ('conditions', 'condition reports'),
                       ('ntk-sweep', 'NTK fixed-point sweep over n')):
        common(sub.add_parser(name, help=text))

    export = sub.add_parser('export-design', help='write one sampled design matrix as CSV')
    common(export)
    export.add_argument('--n', type=int, required=True, help='sample size')
    export.add_argument('--replicate', type=int, default=0)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        'output_path': args.output,
        'workers': args.workers,
        'master_seed': args.seed,
        'strict': True if args.strict else None,
    }


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == 'repro':
        return preset(args.scenario, _overrides(args))
    return load_config(args.config, _overrides(args))


async def run_command(args: argparse.Namespace, config: ExperimentConfig) -> int:
    runner = ExperimentRunner(config)

    if args.command == 'conditions':
        reports = await runner.report_conditions()
        await runner.write_conditions(reports)
        for report in reports:
            print(report.render())
        return EXIT_OK

    if args.command == 'export-design':
        path = await runner.export_design(args.n, args.replicate, config.output_path)
        logger.info(f"✅ Design exported to {path}")
        return EXIT_OK

    if args.command == 'ntk-sweep' or config.scenario.is_ntk:
        table = await runner.ntk_sweep()
    elif args.command == 'repro' or config.tradeoff:
        table = await runner.tradeoff_curve()
    else:
        table = await runner.run_experiment()
    await runner.write(table)

    if table.summary:
        for item in table.summary:
            logger.info(f"📊 n={item['n']}: min score {item['min_score']:.6g} at λ={item['argmin_lam']:.4g}")
    if config.strict and table.has_errors:
        logger.error(f"❌ Strict mode: {len(table.error_rows)} grid points failed")
        return EXIT_NUMERICAL
    return EXIT_OK


async def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigError as e:
        logger.error(f"❌ Configuration error in {e.field}: {e}")
        return EXIT_CONFIG

    logger.info(f"🚀 advlab {args.command} ({config.scenario.value}, workers={config.workers})")
    try:
        return await run_command(args, config)
    except ConfigError as e:
        logger.error(f"❌ Configuration error in {e.field}: {e}")
        return EXIT_CONFIG
    except AdvlabError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return EXIT_NUMERICAL if config.strict else EXIT_FAILURE
    except OSError as e:
        logger.error(f"❌ Cannot write results: {e}")
        return EXIT_FAILURE


def cli(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    return asyncio.run(main(argv))


if __name__ == "__main__":
    sys.exit(cli())
