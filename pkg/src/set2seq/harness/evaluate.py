"""Greedy-decode evaluation and task-appropriate metric computation."""

from __future__ import annotations

import numpy as np

from ..datagen import (
    canonical_duplicate_order,
    check_grammar,
    check_ruleset,
    held_karp,
    tour_length,
)
from ..datagen.io import Instance
from ..decoder import decode_greedy, teacher_forced_nll
from ..encoder import encode_set
from ..metrics import EvalReport, kendall_tau, mean_kendall_tau, pmr
from ..numerics import Tensor, no_grad
from ..numerics.rng import parallel_map
from .builder import Model


def _check_width(model: Model, instances: list[Instance]) -> None:
    widths = {inst.d_raw for inst in instances}
    if widths != {model.d_input}:
        raise ValueError(
            f"dataset feature width {sorted(widths)} does not match model d_input {model.d_input}")


def encode_instance(model: Model, elements: np.ndarray, mask=None, rng=None):
    x = Tensor(np.asarray(elements, dtype=model.dtype))
    return encode_set(x, model.enc_w, model.enc_cfg, mask=mask, rng=rng)


def decode_instance(model: Model, inst: Instance) -> list[int]:
    enc = encode_instance(model, inst.elements)
    return decode_greedy(enc, model.dec_w, model.dec_cfg)


def decode_dataset(model: Model, instances: list[Instance]) -> list[list[int]]:
    _check_width(model, instances)
    with no_grad():
        return parallel_map(lambda inst: decode_instance(model, inst), instances)


def dataset_loss(model: Model, instances: list[Instance], lambda_pair: float,
                 subtract_pair_term: bool = False) -> float:
    """Mean teacher-forced loss over instances that carry targets (no dropout)."""
    from ..decoder import batch_loss

    with_targets = [inst for inst in instances if inst.target is not None]
    if not with_targets:
        raise ValueError("dataset_loss needs at least one instance with a target")
    _check_width(model, with_targets)
    nlls, lss = [], []
    for inst in with_targets:
        enc = encode_instance(model, inst.elements)
        nll, ls = teacher_forced_nll(enc, inst.target, model.dec_w, model.dec_cfg)
        nlls.append(nll)
        lss.append(ls)
    return batch_loss(nlls, lss, lambda_pair, subtract_pair_term).item()


def _grammar_metrics(instances, preds) -> dict:
    canon_preds, targets, valid = [], [], []
    for inst, pred in zip(instances, preds):
        symbols = inst.meta["symbols"]
        ordered = [symbols[i] for i in pred]
        valid.append(check_grammar(ordered, inst.meta["kind"]))
        if inst.target is not None:
            canon_preds.append(canonical_duplicate_order(pred, symbols))
            targets.append(inst.target)
    out = {"validity": 100.0 * sum(valid) / len(valid)}
    if targets:
        out["tau"] = mean_kendall_tau(canon_preds, targets)
        out["pmr"] = pmr(canon_preds, targets)
    return out


def _ruleset_metrics(instances, preds) -> dict:
    valid, canon_preds, targets = [], [], []
    for inst, pred in zip(instances, preds):
        meta = inst.meta
        valid.append(check_ruleset(meta["keys"], pred, meta["n_rel"], meta["modulus"]))
        if inst.target is not None:
            canon_preds.append(pred)
            targets.append(inst.target)
    out = {"validity": 100.0 * sum(valid) / len(valid)}
    if targets:
        out["tau"] = mean_kendall_tau(canon_preds, targets)
        out["pmr"] = pmr(canon_preds, targets)
    return out


def _tsp_metrics(instances, preds, compute_optimal: bool = True) -> dict:
    closed = all(inst.meta.get("convention", "closed") == "closed" for inst in instances)
    pred_lengths = [tour_length(inst.elements, pred, closed=closed)
                    for inst, pred in zip(instances, preds)]
    out = {"tour_length": float(np.mean(pred_lengths))}
    optima = []
    for inst in instances:
        if "optimal_length" in inst.meta:
            optima.append(float(inst.meta["optimal_length"]))
        elif inst.target is not None:
            optima.append(tour_length(inst.elements, inst.target, closed=closed))
        elif compute_optimal and inst.n <= 20:
            optima.append(held_karp(inst.elements, closed=closed)[1])
        else:
            optima = []
            break
    if optima:
        out["optimal_length"] = float(np.mean(optima))
        out["tour_ratio"] = out["tour_length"] / out["optimal_length"]
        out["mean_instance_ratio"] = float(np.mean(
            [p / o for p, o in zip(pred_lengths, optima) if o > 0])) if all(o > 0 for o in optima) else float("nan")
    taus, t_preds, t_targets = [], [], []
    for inst, pred in zip(instances, preds):
        if inst.target is not None:
            t_preds.append(pred)
            t_targets.append(inst.target)
    if t_preds:
        out["tau"] = mean_kendall_tau(t_preds, t_targets)
        out["pmr"] = pmr(t_preds, t_targets)
    return out


def _generic_metrics(instances, preds) -> dict:
    t_preds = [p for inst, p in zip(instances, preds) if inst.target is not None]
    t_targets = [inst.target for inst in instances if inst.target is not None]
    if not t_targets:
        return {}
    return {"tau": mean_kendall_tau(t_preds, t_targets), "pmr": pmr(t_preds, t_targets)}


def evaluate_instances(model: Model, instances: list[Instance],
                       compute_optimal: bool = True) -> dict:
    """Decode every instance and compute the task's metric bundle."""
    if not instances:
        raise ValueError("cannot evaluate zero instances")
    preds = decode_dataset(model, instances)
    task = instances[0].task
    if task.startswith("grammar:"):
        out = _grammar_metrics(instances, preds)
    elif task.startswith("ruleset"):
        out = _ruleset_metrics(instances, preds)
    elif task == "tsp":
        out = _tsp_metrics(instances, preds, compute_optimal=compute_optimal)
    else:
        out = _generic_metrics(instances, preds)
    out["count"] = len(instances)
    return out


def evaluation_report(model: Model, instances: list[Instance], config_hash: str = "",
                      group: str = "") -> EvalReport:
    """Per-instance metric spreads wrapped in an EvalReport (mean/std/count rows)."""
    if not instances:
        raise ValueError("cannot evaluate zero instances")
    preds = decode_dataset(model, instances)
    task = instances[0].task
    report = EvalReport()
    per_tau = [kendall_tau(canonical_prediction(inst, p), inst.target)
               for inst, p in zip(instances, preds) if inst.target is not None]
    if per_tau:
        report.add(task, "tau", per_tau, config_hash=config_hash, group=group)
        exact = [100.0 if canonical_prediction(inst, p) == inst.target else 0.0
                 for inst, p in zip(instances, preds) if inst.target is not None]
        report.add(task, "pmr", exact, config_hash=config_hash, group=group)
    if task.startswith("grammar:"):
        vals = [100.0 if check_grammar([inst.meta["symbols"][i] for i in p], inst.meta["kind"]) else 0.0
                for inst, p in zip(instances, preds)]
        report.add(task, "validity", vals, config_hash=config_hash, group=group)
    elif task.startswith("ruleset"):
        vals = [100.0 if check_ruleset(inst.meta["keys"], p, inst.meta["n_rel"], inst.meta["modulus"]) else 0.0
                for inst, p in zip(instances, preds)]
        report.add(task, "validity", vals, config_hash=config_hash, group=group)
    elif task == "tsp":
        closed = all(inst.meta.get("convention", "closed") == "closed" for inst in instances)
        lengths = [tour_length(inst.elements, p, closed=closed)
                   for inst, p in zip(instances, preds)]
        report.add(task, "tour_length", lengths, config_hash=config_hash, group=group)
    return report


def canonical_prediction(inst: Instance, pred: list[int]) -> list[int]:
    """Duplicate-token normalization for grammar tasks; identity elsewhere."""
    if inst.task.startswith("grammar:"):
        return canonical_duplicate_order(pred, inst.meta["symbols"])
    return list(int(v) for v in pred)
