"""Training loop: batched teacher forcing, AdamW, checkpoints, JSONL log."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..decoder import batch_loss, teacher_forced_nll
from ..numerics import AdamwState, SeededRng, adamw_step, clip_grad_norm
from .batching import make_batches
from .builder import Model, build_model
from .checkpoint import load_checkpoint, rng_restore, rng_snapshot, save_checkpoint
from .config import RunConfig
from .data import build_instances, split_validation
from .evaluate import dataset_loss, encode_instance, evaluate_instances

# Validation metrics where smaller values are the goal; early stop and
# best-checkpoint selection compare accordingly.
LOWER_IS_BETTER = frozenset({"loss", "tour_length", "tour_ratio",
                             "mean_instance_ratio", "optimal_length"})


class DivergenceError(RuntimeError):
    """Raised when the training loss goes non-finite.

    The most recent epoch checkpoint (attribute `last_checkpoint`) is left
    on disk untouched.
    """

    def __init__(self, message: str, last_checkpoint: Path):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


@dataclass
class TrainResult:
    out_dir: Path
    epochs_run: int
    stopped_early: bool
    best_epoch: int
    best_val_loss: float
    last_checkpoint: Path
    best_checkpoint: Path
    log_path: Path
    elapsed_s: float
    history: list[dict] = field(default_factory=list)
    final_val: dict = field(default_factory=dict)


def _metric_reached(name: str, value: float, goal: float) -> bool:
    return value <= goal if name in LOWER_IS_BETTER else value >= goal


def _epoch_pass(model: Model, batches, cfg: RunConfig, adam: AdamwState,
                train_rng: SeededRng) -> float:
    """One optimization pass over the batches; returns mean instance loss."""
    o = cfg.optim
    total, count = 0.0, 0
    for batch in batches:
        model.store.zero_grads()
        nlls, pair_losses = [], []
        for i in range(batch.size):
            n = int(batch.mask[i].sum())
            enc = encode_instance(model, batch.elements[i, :n], rng=train_rng)
            nll, ls = teacher_forced_nll(enc, batch.targets[i], model.dec_w,
                                         model.dec_cfg, rng=train_rng)
            nlls.append(nll)
            pair_losses.append(ls)
        loss = batch_loss(nlls, pair_losses, o.lambda_pair, o.subtract_pair_term)
        value = loss.item()
        if not math.isfinite(value):
            raise FloatingPointError("non-finite batch loss")
        loss.backward()
        clip_grad_norm(model.store, o.clip_norm)
        adamw_step(model.store, adam, lr=o.lr, betas=(o.beta1, o.beta2),
                   eps=o.eps, weight_decay=o.weight_decay)
        total += value * batch.size
        count += batch.size
    return total / count


def train(cfg: RunConfig, out_dir, resume: str | Path | None = None,
          log_fn=None) -> TrainResult:
    """Run (or resume) a full training job under out_dir.

    Writes train_log.jsonl (one JSON object per event), last.ckpt.npz after
    every epoch, and best.ckpt.npz whenever validation loss improves.  All
    randomness derives from cfg.seed, so a fresh run of the same config is
    bit-reproducible and a resumed run continues the interrupted stream.
    """
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"
    last_path = out_dir / "last.ckpt.npz"
    best_path = out_dir / "best.ckpt.npz"
    started = time.monotonic()

    root = SeededRng(cfg.seed)
    data_rng = root.derive(1)
    train_rng = root.derive(3)
    split_rng = root.derive(4)
    instances = build_instances(cfg.data, data_rng, split="train")
    if any(inst.target is None for inst in instances):
        raise ValueError("training requires targets on every instance")
    train_set, val_set = split_validation(instances, cfg.data.val_fraction, split_rng)
    if not train_set:
        raise ValueError("empty training split")

    if resume is not None:
        model, adam, ck_cfg, meta = load_checkpoint(resume)
        if ck_cfg.config_hash() != cfg.config_hash():
            raise ValueError(
                f"resume config mismatch: checkpoint {ck_cfg.config_hash()} "
                f"vs requested {cfg.config_hash()}")
        train_rng = rng_restore(meta["rng_states"])["train"]
        start_epoch = meta["epoch"] + 1
        best_val = float(meta["extra"].get("best_val_loss", math.inf))
        best_epoch = int(meta["extra"].get("best_epoch", -1))
        mode = "a"
    else:
        model = build_model(cfg, d_input=train_set[0].d_raw, init_rng=root.derive(2))
        adam = AdamwState(model.store)
        start_epoch = 0
        best_val = math.inf
        best_epoch = -1
        mode = "w"
        # Epoch -1 snapshot so a first-epoch divergence still leaves a
        # loadable checkpoint behind.
        save_checkpoint(last_path, model, adam, cfg, epoch=-1,
                        rng_states=rng_snapshot({"train": train_rng}))

    history: list[dict] = []
    stopped_early = False
    final_val: dict = {}
    o = cfg.optim

    with log_path.open(mode, encoding="utf-8") as log:
        def emit(event: dict) -> None:
            log.write(json.dumps(event) + "\n")
            log.flush()
            if log_fn is not None:
                log_fn(event)

        if resume is None:
            emit({"event": "config", "config": cfg.resolved(),
                  "config_hash": cfg.config_hash(),
                  "n_train": len(train_set), "n_val": len(val_set),
                  "n_params": model.store.n_scalars()})

        epoch = start_epoch - 1
        for epoch in range(start_epoch, o.epochs):
            batches = make_batches(train_set, o.batch_size, train_rng)
            try:
                train_loss = _epoch_pass(model, batches, cfg, adam, train_rng)
            except FloatingPointError as exc:
                emit({"event": "divergence", "epoch": epoch, "error": str(exc)})
                raise DivergenceError(
                    f"training diverged at epoch {epoch}: {exc}; "
                    f"last checkpoint kept at {last_path}", last_path) from exc

            record = {"event": "epoch", "epoch": epoch, "train_loss": train_loss}
            if val_set:
                record["val_loss"] = dataset_loss(model, val_set, o.lambda_pair,
                                                  o.subtract_pair_term)
                if (epoch + 1) % cfg.eval_every == 0 or epoch == o.epochs - 1:
                    final_val = evaluate_instances(model, val_set, compute_optimal=False)
                    record.update({f"val_{k}": v for k, v in final_val.items()
                                   if k != "count"})
            history.append(record)

            val_loss = record.get("val_loss", train_loss)
            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                save_checkpoint(best_path, model, adam, cfg, epoch=epoch,
                                rng_states=rng_snapshot({"train": train_rng}),
                                extra={"best_val_loss": best_val,
                                       "best_epoch": best_epoch})
            save_checkpoint(last_path, model, adam, cfg, epoch=epoch,
                            rng_states=rng_snapshot({"train": train_rng}),
                            extra={"best_val_loss": best_val,
                                   "best_epoch": best_epoch})
            emit(record)

            if o.stop_metric is not None and o.stop_value is not None:
                key = o.stop_metric if o.stop_metric == "train_loss" else f"val_{o.stop_metric}"
                if o.stop_metric == "loss":
                    key = "val_loss"
                if key in record and _metric_reached(o.stop_metric, record[key], o.stop_value):
                    stopped_early = True
                    emit({"event": "early_stop", "epoch": epoch,
                          "metric": o.stop_metric, "value": record[key]})
                    break

        # No timing fields in the log: same-seed reruns must be bit-identical.
        emit({"event": "done", "epochs_run": epoch - start_epoch + 1,
              "best_epoch": best_epoch, "best_val_loss": best_val})

    if not best_path.exists():  # no validation improvement ever recorded
        save_checkpoint(best_path, model, adam, cfg, epoch=epoch,
                        rng_states=rng_snapshot({"train": train_rng}),
                        extra={"best_val_loss": best_val, "best_epoch": best_epoch})
    return TrainResult(
        out_dir=out_dir,
        epochs_run=epoch - start_epoch + 1,
        stopped_early=stopped_early,
        best_epoch=best_epoch,
        best_val_loss=best_val,
        last_checkpoint=last_path,
        best_checkpoint=best_path,
        log_path=log_path,
        elapsed_s=time.monotonic() - started,
        history=history,
        final_val=final_val,
    )
