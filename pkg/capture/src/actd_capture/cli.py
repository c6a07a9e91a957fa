"""Console entry point: ``actd-capture``.

Exit codes follow the workbench convention: 0 success, 1 configuration
or validation failure (bad options, unresolvable model, filters that
match nothing), 2 a capture that failed mid-run.
"""

from __future__ import annotations

import sys

import click

from . import __version__
from .run import (
    DEFAULT_FILTERS,
    DEFAULT_TEXT,
    CaptureConfig,
    CaptureError,
    ModelLoadError,
    NoModulesMatchedError,
    capture_run,
)


@click.command(name="actd-capture")
@click.version_option(version=__version__, prog_name="actd-capture")
@click.option("--model", required=True,
              help="'tiny', 'tiny:<seed>', or a checkpoint path.")
@click.option("--filter", "filters", default=",".join(DEFAULT_FILTERS),
              show_default=True, metavar="PAT[,PAT...]",
              help="Comma-separated glob patterns for linear-module names.")
@click.option("--seq-len", default=128, show_default=True, type=int)
@click.option("--text", default=DEFAULT_TEXT, show_default=True,
              help="Sample text, tokenized as UTF-8 bytes cycled to --seq-len.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cli(model: str, filters: str, seq_len: int, text: str, out_path: str) -> None:
    """Record linear-module inputs from one forward pass into an ACTD file."""
    patterns = tuple(p.strip() for p in filters.split(",") if p.strip())
    cfg = CaptureConfig(
        model=model, out_path=out_path, filters=patterns, text=text, seq_len=seq_len
    )
    summary = capture_run(cfg)
    click.echo(
        f"wrote {summary.record_count} records "
        f"({summary.bytes_written} bytes) to {summary.path}"
    )


def main(argv=None) -> None:
    """CLI wrapper mapping failures onto the stable exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(130)
    except (ModelLoadError, NoModulesMatchedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)
    except (CaptureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
