"""HF-first INR fitting - command-line entry point

    python app.py fit    <inputs...> [flags]
    python app.py ablate <inputs...> [--tau-list 0.1,0.3] [--n-list 4,8] [--stage1-list [100,200]] [flags]
    python app.py eval   <recon> <truth> [--region] [flags]
    python app.py mask   <image> [--masked] [flags]
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from config import constants
import config.settings as settings
from services import harness
from utils.errors import HfInrError, NoInputsError
from utils.image_io import parse_size
from utils.logs import setup_logging

logger = logging.getLogger("app")


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _shared_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON experiment file; flags override its values")
    p.add_argument("--profile", choices=sorted(constants.PROFILES), help="desk- or full-scale defaults")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--backbone", choices=constants.BACKBONES)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, choices=sorted(constants.NEIGHBORHOODS))
    p.add_argument("--pad-mode", choices=constants.PAD_MODES)
    p.add_argument("--stage1", type=int, help="HF-prioritized epochs")
    p.add_argument("--stage2", type=int, help="full-image MSE epochs")
    p.add_argument("--lr", type=float)
    p.add_argument("--width", type=int)
    p.add_argument("--layers", type=int, help="hidden layers")
    p.add_argument("--omega0", type=float)
    p.add_argument("--finer-bias-scale", type=float)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--reset-optimizer", action="store_true", default=None)
    p.add_argument("--resize", type=parse_size, help="HxW")
    p.add_argument("--grayscale", action="store_true", default=None)
    p.add_argument("--baseline", action="store_true", default=None,
                   help="also run the stage1=0 twin of every run")
    p.add_argument("--workers", type=int)
    p.add_argument("--region-threshold", type=float)
    p.add_argument("--progress", action="store_true", default=None,
                   help="print epoch/stage/loss/psnr lines while training")
    p.add_argument("--log-level", default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_flags()
    parser = argparse.ArgumentParser(prog="app.py", description="High-frequency-first INR image fitting")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", parents=[shared], help="fit images and write artifacts")
    p_fit.add_argument("inputs", nargs="*", help="files, directories or glob patterns")
    p_fit.add_argument("--upsample", type=int, help="also render the fit at k x resolution")

    p_abl = sub.add_parser("ablate", parents=[shared],
                           help="run a tau / n / stage-1 grid (tau x n grid when no list is given)")
    p_abl.add_argument("inputs", nargs="*")
    p_abl.add_argument("--tau-list", type=_float_list, nargs="?", const=constants.TAU_GRID,
                       help="comma-separated; bare flag uses the default grid")
    p_abl.add_argument("--n-list", type=_int_list, nargs="?", const=constants.N_GRID,
                       help="comma-separated; bare flag uses the default grid")
    p_abl.add_argument("--stage1-list", type=_int_list, nargs="?", const=constants.STAGE1_GRID,
                       help="comma-separated; bare flag uses the default grid")
    p_abl.add_argument("--total-epochs", type=int, help="held fixed across the stage-1 grid")

    p_eval = sub.add_parser("eval", parents=[shared], help="score a reconstruction")
    p_eval.add_argument("recon")
    p_eval.add_argument("truth")
    p_eval.add_argument("--region", action="store_true", help="HF/LF region PSNR from the truth's mask")

    p_mask = sub.add_parser("mask", parents=[shared], help="write the soft mask heatmap")
    p_mask.add_argument("image")
    p_mask.add_argument("--masked", action="store_true", help="also write image x mask")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Translate parsed flags into a spec document; unset flags are None and ignored"""
    get = lambda name: getattr(args, name, None)  # noqa: E731
    return {
        "inputs": get("inputs") or None,
        "profile": get("profile"),
        "out_dir": get("out"),
        "resize": get("resize"),
        "grayscale": get("grayscale"),
        "baseline": get("baseline"),
        "workers": get("workers"),
        "upsample": get("upsample"),
        "tau_list": get("tau_list"),
        "n_list": get("n_list"),
        "stage1_list": get("stage1_list"),
        "total_epochs": get("total_epochs"),
        "train": {
            "seed": get("seed"),
            "backbone": get("backbone"),
            "stage1_epochs": get("stage1"),
            "stage2_epochs": get("stage2"),
            "learning_rate": get("lr"),
            "width": get("width"),
            "hidden_layers": get("layers"),
            "omega0": get("omega0"),
            "finer_bias_scale": get("finer_bias_scale"),
            "eval_every": get("eval_every"),
            "reset_optimizer": get("reset_optimizer"),
            "region_threshold": get("region_threshold"),
            "progress": get("progress") or (settings.get_progress_enabled() or None),
        },
        "mask": {
            "tau": get("tau"),
            "alpha": get("alpha"),
            "n": get("n"),
            "pad_mode": get("pad_mode"),
        },
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        spec = harness.build_spec(args.config, overrides_from_args(args))

        if args.command == "fit":
            return 0 if harness.run_fit(spec).ok else 1
        if args.command == "ablate":
            return 0 if harness.run_ablation(spec).ok else 1
        if args.command == "eval":
            harness.run_eval(args.recon, args.truth, spec.out_dir, spec.resize, spec.grayscale,
                             spec.train.mask if args.region else None,
                             spec.train.region_threshold)
            return 0
        if args.command == "mask":
            harness.run_mask(args.image, spec.out_dir, spec.train.mask, spec.resize,
                             spec.grayscale, args.masked)
            return 0
    except NoInputsError as e:
        logger.error("%s", e)
        return 2
    except (HfInrError, ValueError, OSError) as e:
        logger.error("%s: %s", args.command, e)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
