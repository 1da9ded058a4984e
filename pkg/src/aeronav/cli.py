"""Command-line pipeline: generate -> train -> eval/fuse -> score -> report,
plus the long-running session service.

Commands are thin shells over the library: they parse flags, call one library
entry point, echo a one-line summary, and exit nonzero through click on any
error.  Nothing here writes timestamps or machine-specific state, so every
command is reproducible byte-for-byte from its flags and --seed.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass
from pathlib import Path

import click

from .agents import POLICY_KINDS, TrainConfig, policy_from_checkpoint
from .agents import train as train_policy
from .dataset import (
    DialogStyle,
    GeneratorConfig,
    generate_corpus,
    load_episodes,
    save_episodes,
)
from .fusion import fused_policy, load_ensemble
from .geometry import path_length
from .metrics import GpMode, MetricConfig, evaluate_split, format_table
from .nn import load_checkpoint, save_checkpoint
from .simulator import (
    RolloutConfig,
    load_predictions,
    overfit_report,
    predictions_as_trajectories,
    run_episode,
    save_predictions,
)

_SETTINGS = {"auto_envvar_prefix": "AERONAV",
             "help_option_names": ["-h", "--help"]}


@dataclass(frozen=True)
class CommandResult:
    """What a finished command reports: status, summary, artifact location."""

    exit_code: int
    summary: str
    report_path: Path | None = None

    def __post_init__(self):
        if self.exit_code != 0:
            raise ValueError("successful CommandResult must carry exit code 0"
                             " (errors travel as exceptions)")


def _finish(result: CommandResult) -> None:
    click.echo(result.summary)
    if result.report_path is not None:
        click.echo(f"report: {result.report_path}")


def _gp_mode(flag: str) -> GpMode:
    return GpMode(flag.replace("-", "_"))


def _load_episodes(path) -> list:
    try:
        return load_episodes(path)
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"cannot read episodes: {exc}") from exc


@click.group(context_settings=_SETTINGS)
def main():
    """Aerial vision-and-dialog navigation workbench.

    Every command is deterministic: rerunning with the same flags (including
    --seed) writes byte-identical files.  Any option may also be supplied via
    an environment variable named AERONAV_<COMMAND>_<OPTION>, e.g.
    AERONAV_GENERATE_COUNT=50.
    """


# ------------------------------------------------------------------ generate

@main.command("generate")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Base seed; episode k uses seed+k.")
@click.option("--count", type=int, default=100, show_default=True)
@click.option("--max-steps", type=int, default=2, show_default=True,
              help="Movement budget M per episode.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
              required=True)
def cmd_generate(seed: int, count: int, max_steps: int, out: Path):
    """Write COUNT synthetic episodes as JSON lines and print corpus stats."""
    try:
        episodes = generate_corpus(seed, count,
                                   GeneratorConfig(max_steps=max_steps))
        save_episodes(episodes, out)
    except (OSError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    rounds = [r for ep in episodes for r in ep.dialog]
    if rounds:
        ego = sum(r.style in (DialogStyle.EGOCENTRIC, DialogStyle.MIXED)
                  for r in rounds) / len(rounds)
        allo = sum(r.style in (DialogStyle.ALLOCENTRIC, DialogStyle.MIXED)
                   for r in rounds) / len(rounds)
        mean_len = sum(path_length(ep.gt_trajectory)
                       for ep in episodes) / len(episodes)
        stats = (f"egocentric {ego:.3f}  allocentric {allo:.3f}  "
                 f"mean path {mean_len:.2f} m")
    else:
        stats = "empty corpus"
    _finish(CommandResult(0, f"wrote {len(episodes)} episodes -> {out}\n{stats}"))


# --------------------------------------------------------------------- train

@main.command("train")
@click.argument("kind", type=click.Choice(sorted(POLICY_KINDS)))
@click.option("--data", type=click.Path(exists=True, dir_okay=False,
                                        path_type=Path), required=True)
@click.option("--val", type=click.Path(exists=True, dir_okay=False,
                                       path_type=Path), default=None,
              help="Optional held-out split; adds val_loss to checkpoints.")
@click.option("--iters", type=int, default=200, show_default=True)
@click.option("--checkpoints", default="", show_default=False,
              help="Comma-separated iteration marks, e.g. 200,2000 "
                   "(default: final iteration only).")
@click.option("--batch-size", type=int, default=4, show_default=True)
@click.option("--lr", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path),
              required=True, help="Directory for checkpoint files.")
def cmd_train(kind: str, data: Path, val: Path | None, iters: int,
              checkpoints: str, batch_size: int, lr: float, seed: int,
              out: Path):
    """Fit a policy and write one checkpoint file per configured mark."""
    episodes = _load_episodes(data)
    val_episodes = _load_episodes(val) if val else []
    try:
        plan = tuple(int(tok) for tok in checkpoints.split(",") if tok.strip())
        cfg = TrainConfig(total_iterations=iters, batch_size=batch_size,
                          lr=lr, checkpoint_iterations=plan, seed=seed)
        emitted = train_policy(kind, episodes, val_episodes, cfg)
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for ckpt in emitted:
        path = out / f"{kind}-{ckpt.iteration:06d}.ckpt"
        save_checkpoint(ckpt, path)
        note = f"iteration {ckpt.iteration}: train_loss {ckpt.metrics['train_loss']:.6f}"
        if "val_loss" in ckpt.metrics:
            note += f"  val_loss {ckpt.metrics['val_loss']:.6f}"
        lines.append(f"{note} -> {path}")
    _finish(CommandResult(0, "\n".join(lines)))


# ---------------------------------------------------------------- eval/fuse

def _rollout_flags(fn):
    fn = click.option("--max-steps", type=int, default=None,
                      help="Override each episode's movement budget.")(fn)
    fn = click.option("--stop-threshold", type=float, default=0.5,
                      show_default=True)(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
                      required=True)(fn)
    fn = click.option("--data", type=click.Path(exists=True, dir_okay=False,
                                                path_type=Path),
                      required=True)(fn)
    return fn


def _run_rollouts(policy, config, episodes, out: Path, max_steps,
                  stop_threshold) -> CommandResult:
    cfg = RolloutConfig(step_max=config.step_max, resolution=config.resolution,
                        max_steps=max_steps, stop_threshold=stop_threshold)
    try:
        preds = [run_episode(policy, ep, cfg) for ep in episodes]
        save_predictions(preds, out)
    except (OSError, RuntimeError) as exc:
        raise click.ClickException(str(exc)) from exc
    stopped = sum(p.stop_reason.value == "stopped" for p in preds)
    return CommandResult(
        0, f"rolled out {len(preds)} episodes ({stopped} stopped) -> {out}")


@main.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False,
                                              path_type=Path), required=True)
@_rollout_flags
def cmd_eval(checkpoint: Path, data: Path, out: Path, stop_threshold: float,
             max_steps: int | None):
    """Roll out one checkpoint over a dataset; write predictions JSONL."""
    try:
        policy = policy_from_checkpoint(load_checkpoint(checkpoint))
    except (OSError, ValueError) as exc:
        raise click.ClickException(f"cannot load {checkpoint}: {exc}") from exc
    episodes = _load_episodes(data)
    _finish(_run_rollouts(policy, policy.config, episodes, out, max_steps,
                          stop_threshold))


@main.command("fuse")
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False,
                                            path_type=Path), required=True,
              help="Ensemble manifest: {\"members\": [{\"kind\", \"path\"}]}.")
@_rollout_flags
def cmd_fuse(manifest: Path, data: Path, out: Path, stop_threshold: float,
             max_steps: int | None):
    """Roll out an output-averaging ensemble; write predictions JSONL."""
    try:
        ensemble = load_ensemble(manifest)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    episodes = _load_episodes(data)
    _finish(_run_rollouts(lambda state: fused_policy(ensemble, state),
                          ensemble.policies[0].config, episodes, out,
                          max_steps, stop_threshold))


# --------------------------------------------------------------------- score

@main.command("score")
@click.option("--data", type=click.Path(exists=True, dir_okay=False,
                                        path_type=Path), required=True)
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False,
                                               path_type=Path), required=True,
              multiple=True, help="Prediction file; repeat for one table row "
                                  "per file.")
@click.option("--iou-threshold", type=float, default=0.4, show_default=True)
@click.option("--gp-mode", type=click.Choice(["path-literal", "displacement"]),
              default="path-literal", show_default=True)
@click.option("--label", default=None, multiple=True,
              help="Row label, one per predictions file "
                   "(default: the file stem).")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path),
              default=None, help="Write the full metric report as JSON "
                                 "(single predictions file only).")
def cmd_score(data: Path, predictions: tuple[Path, ...], iou_threshold: float,
              gp_mode: str, label: tuple[str, ...], out: Path | None):
    """Score prediction files against ground truth, one leaderboard row each."""
    if label and len(label) != len(predictions):
        raise click.ClickException(
            f"{len(label)} labels for {len(predictions)} prediction files")
    if out is not None and len(predictions) != 1:
        raise click.ClickException("--out requires a single predictions file")
    episodes = _load_episodes(data)
    known = {ep.id for ep in episodes}
    cfg = MetricConfig(iou_threshold=iou_threshold, gp_mode=_gp_mode(gp_mode))
    rows = []
    report = None
    for i, path in enumerate(predictions):
        try:
            preds = load_predictions(path)
        except (OSError, ValueError) as exc:
            raise click.ClickException(str(exc)) from exc
        for pred in preds:
            if pred.episode_id not in known:
                raise click.ClickException(
                    f"prediction for episode {pred.episode_id!r} has no "
                    f"match in {data}")
        try:
            report = evaluate_split(episodes,
                                    predictions_as_trajectories(preds), cfg)
        except ValueError as exc:
            raise click.ClickException(str(exc)) from exc
        rows.append((label[i] if label else path.stem,
                     report.spl, report.sr, report.gp))
    if out is not None:
        out.write_text(report.to_json() + "\n", encoding="utf-8")
    _finish(CommandResult(0, format_table(rows), report_path=out))


# -------------------------------------------------------------------- report

@main.command("report")
@click.option("--data", type=click.Path(exists=True, dir_okay=False,
                                        path_type=Path), required=True,
              help="Validation split to score checkpoints on.")
@click.option("--iou-threshold", type=float, default=0.4, show_default=True)
@click.option("--gp-mode", type=click.Choice(["path-literal", "displacement"]),
              default="path-literal", show_default=True)
@click.argument("checkpoints", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
def cmd_report(data: Path, iou_threshold: float, gp_mode: str,
               checkpoints: tuple[Path, ...]):
    """Ablation table: evaluate each checkpoint on a split, one row apiece."""
    episodes = _load_episodes(data)
    try:
        rows = overfit_report(
            list(checkpoints), episodes,
            metric_cfg=MetricConfig(iou_threshold=iou_threshold,
                                    gp_mode=_gp_mode(gp_mode)))
    except (ValueError, RuntimeError) as exc:
        raise click.ClickException(str(exc)) from exc
    _finish(CommandResult(0, format_table(rows)))


# --------------------------------------------------------------------- serve

@main.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False,
                                              path_type=Path), default=None,
              help="Fly sessions with this policy "
                   "(default: goal-seeking autopilot).")
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False,
                                            path_type=Path), default=None,
              help="Fly sessions with a fused ensemble.")
@click.option("--transcripts", type=click.Path(file_okay=False,
                                               path_type=Path), default=None,
              help="Directory for append-only per-session event logs.")
@click.option("--capacity", type=int, default=64, show_default=True)
@click.option("--steps-per-round", type=int, default=1, show_default=True)
@click.option("--max-steps", type=int, default=None,
              help="Override each episode's movement budget.")
def cmd_serve(port: int, host: str, checkpoint: Path | None,
              manifest: Path | None, transcripts: Path | None, capacity: int,
              steps_per_round: int, max_steps: int | None):
    """Run the interactive session service (HTTP + event stream)."""
    import uvicorn

    from .server import create_app
    from .sessions import SessionManager

    if checkpoint is not None and manifest is not None:
        raise click.ClickException("--checkpoint and --manifest are exclusive")
    policy = None
    step_max, resolution = 12.0, 16
    try:
        if checkpoint is not None:
            policy = policy_from_checkpoint(load_checkpoint(checkpoint))
            step_max = policy.config.step_max
            resolution = policy.config.resolution
        elif manifest is not None:
            ensemble = load_ensemble(manifest)
            ref = ensemble.policies[0].config
            step_max, resolution = ref.step_max, ref.resolution
            policy = lambda state: fused_policy(ensemble, state)
    except (OSError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc

    manager = SessionManager(
        policy=policy, capacity=capacity, steps_per_round=steps_per_round,
        rollout_cfg=RolloutConfig(step_max=step_max, resolution=resolution,
                                  max_steps=max_steps))
    app = create_app(manager, transcript_dir=transcripts)

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise click.ClickException(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()
    click.echo(f"serving sessions on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":      # pragma: no cover - module execution hook
    main()
