"""Harness tests: config, batching, checkpoints, training loop, evaluation, CLI."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
import yaml

from set2seq.datagen import Instance, load_dataset, save_dataset
from set2seq.harness import (
    ConfigError,
    DivergenceError,
    RunConfig,
    build_instances,
    build_model,
    dataset_loss,
    decode_dataset,
    evaluate_instances,
    evaluation_report,
    load_checkpoint,
    load_config,
    make_batches,
    pad_batch,
    parse_overrides,
    save_checkpoint,
    split_validation,
    train,
)
from set2seq.harness.cli import main as cli_main
from set2seq.harness.train import LOWER_IS_BETTER, _metric_reached
from set2seq.numerics import AdamwState, SeededRng

TINY = [
    "model.d_model=16", "model.n_heads=2", "model.n_sit_layers=1",
    "optim.epochs=2", "optim.batch_size=8", "optim.dropout=0.0",
    "data.count=24", "data.eval_count=6", "data.n_min=1", "data.n_max=3",
]


def tiny_cfg(*extra: str) -> RunConfig:
    return load_config(overrides=TINY + list(extra))


# ---------------------------------------------------------------------------
# Config loading


def test_config_defaults():
    cfg = RunConfig()
    assert cfg.model.d_model == 256 and cfg.model.n_heads == 4
    assert cfg.optim.lr == 1e-4 and cfg.optim.epochs == 50
    assert cfg.optim.lambda_pair == 0.1
    assert cfg.data.task == "anbncn" and cfg.precision == "single"


def test_desk_profile_overlay():
    cfg = load_config(profile="desk")
    assert cfg.model.d_model == 64 and cfg.model.n_heads == 2
    assert cfg.model.n_sit_layers == 2 and cfg.optim.epochs == 20
    assert cfg.optim.lr == 1e-4  # untouched by the overlay
    assert cfg.profile == "desk"


def test_config_precedence_file_over_profile_override_over_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(
        {"profile": "desk", "model": {"d_model": 128}, "optim": {"lr": 2e-4}}))
    cfg = load_config(path=path)
    assert cfg.model.d_model == 128      # file beats profile
    assert cfg.model.n_heads == 2        # profile entry survives where file is silent
    cfg2 = load_config(path=path, overrides=["model.d_model=32"])
    assert cfg2.model.d_model == 32      # override beats file
    assert cfg2.optim.lr == 2e-4


def test_lambda_alias_round_trips():
    cfg = load_config(overrides=["optim.lambda=0.5"])
    assert cfg.optim.lambda_pair == 0.5
    resolved = cfg.resolved()
    assert resolved["optim"]["lambda"] == 0.5
    assert "lambda_pair" not in resolved["optim"]


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ConfigError, match="valid keys in 'optim'.*\\blr\\b"):
        load_config(overrides=["optim.learning_rate=1"])
    with pytest.raises(ConfigError, match="valid top-level keys"):
        load_config(overrides=["traning=1"])


def test_override_type_errors():
    with pytest.raises(ConfigError, match="number"):
        load_config(overrides=["optim.lr=fast"])
    with pytest.raises(ConfigError, match="integer"):
        load_config(overrides=["seed=1.5"])
    with pytest.raises(ConfigError, match="boolean"):
        load_config(overrides=["model.use_layer_norm=maybe"])


def test_stop_metric_and_value_must_pair():
    with pytest.raises(ConfigError, match="stop"):
        load_config(overrides=["optim.stop_metric=loss"])
    with pytest.raises(ConfigError, match="stop"):
        load_config(overrides=["optim.stop_value=1.0"])
    cfg = load_config(overrides=["optim.stop_metric=loss", "optim.stop_value=1.0"])
    assert cfg.optim.stop_metric == "loss"


def test_config_hash_tracks_content():
    a = load_config(overrides=["seed=1"])
    b = load_config(overrides=["seed=1"])
    c = load_config(overrides=["seed=2"])
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_load_config_from_base_copies():
    base = tiny_cfg()
    derived = load_config(base=base, overrides=["seed=99"])
    assert derived.seed == 99 and base.seed == 0
    assert derived.model.d_model == base.model.d_model
    with pytest.raises(ConfigError, match="not both"):
        load_config(path="x.yaml", base=base)


def test_unknown_profile_is_an_error():
    with pytest.raises(ConfigError, match="profile"):
        load_config(profile="server")


def test_profile_override_wins(tmp_path):
    cfg = load_config(overrides=["profile=desk"])
    assert cfg.model.d_model == 64


def test_embedded_task_requires_path():
    with pytest.raises(ConfigError, match="train_path"):
        load_config(overrides=["data.task=embedded"])


def test_validation_catches_bad_sections():
    with pytest.raises(ConfigError, match="precision"):
        load_config(overrides=["precision=half"])
    with pytest.raises(ConfigError, match="divide"):
        load_config(overrides=["model.d_model=10", "model.n_heads=3"])
    with pytest.raises(ConfigError, match="eval_every"):
        load_config(overrides=["eval_every=0"])
    with pytest.raises(ConfigError, match="task"):
        load_config(overrides=["data.task=sudoku"])


def test_parse_overrides_shapes():
    tree = parse_overrides(["optim.lr=3e-4", "seed=7", "model.sigma=tanh"])
    assert tree == {"optim": {"lr": "3e-4"}, "seed": 7, "model": {"sigma": "tanh"}}
    with pytest.raises(ConfigError, match="section.key"):
        parse_overrides(["optim.lr"])
    with pytest.raises(ConfigError, match="key"):
        parse_overrides(["a.b.c=1"])


# ---------------------------------------------------------------------------
# Batching


def _instances(sizes, d=3, seed=0) -> list[Instance]:
    rng = SeededRng(seed)
    return [
        Instance(elements=rng.derive(i).uniform(0.0, 1.0, (n, d)),
                 target=list(range(n)), task="generic", meta={})
        for i, n in enumerate(sizes)
    ]


def test_pad_batch_shapes_and_masks():
    batch = pad_batch(_instances([2, 4, 3]))
    assert batch.elements.shape == (3, 4, 3)
    assert batch.mask.tolist() == [
        [True, True, False, False],
        [True, True, True, True],
        [True, True, True, False],
    ]
    np.testing.assert_array_equal(batch.elements[0, 2:], np.zeros((2, 3)))
    np.testing.assert_array_equal(
        batch.elements[0, :2], batch.instances[0].elements)
    assert batch.size == 3 and batch.targets[1] == [0, 1, 2, 3]


def test_pad_batch_explicit_width():
    batch = pad_batch(_instances([2]), n_max=5)
    assert batch.elements.shape == (1, 5, 3)
    with pytest.raises(ValueError, match="n_max"):
        pad_batch(_instances([4]), n_max=3)


def test_pad_batch_rejects_mixed_widths_and_empty():
    mixed = _instances([2], d=3) + _instances([2], d=4)
    with pytest.raises(ValueError, match="widths"):
        pad_batch(mixed)
    with pytest.raises(ValueError, match="zero"):
        pad_batch([])


def test_make_batches_covers_every_instance_once():
    insts = _instances([3, 1, 4, 2, 2, 5, 1, 3, 3])
    batches = make_batches(insts, batch_size=4)
    seen = [id(inst) for b in batches for inst in b.instances]
    assert sorted(seen) == sorted(id(i) for i in insts)
    assert all(b.size <= 4 for b in batches)


def test_make_batches_without_rng_is_size_sorted():
    insts = _instances([5, 1, 3, 2, 4])
    batches = make_batches(insts, batch_size=2)
    ns = [inst.n for b in batches for inst in b.instances]
    assert ns == sorted(ns)


def test_make_batches_buckets_similar_cardinalities():
    insts = _instances([1] * 8 + [6] * 8)
    batches = make_batches(insts, batch_size=8, rng=SeededRng(3))
    for b in batches:
        sizes = {inst.n for inst in b.instances}
        assert len(sizes) == 1  # no mixed 1-and-6 batch, so padding stays tight


def test_make_batches_is_deterministic_per_rng_state():
    insts = _instances([2, 3, 2, 3, 2, 3])
    a = make_batches(insts, batch_size=2, rng=SeededRng(9))
    b = make_batches(insts, batch_size=2, rng=SeededRng(9))
    assert [[inst.n for inst in x.instances] for x in a] == \
           [[inst.n for inst in x.instances] for x in b]
    with pytest.raises(ValueError, match="batch_size"):
        make_batches(insts, batch_size=0)


# ---------------------------------------------------------------------------
# Model builder


def test_build_model_precision_and_determinism():
    cfg_s = tiny_cfg()
    cfg_d = tiny_cfg("precision=double")
    m32 = build_model(cfg_s, d_input=4)
    m64 = build_model(cfg_d, d_input=4)
    assert m32.dtype == np.float32 and m64.dtype == np.float64
    again = build_model(tiny_cfg(), d_input=4)
    for name, p in m32.store.items():
        np.testing.assert_array_equal(p.data, again.store[name].data)
    diff_seed = build_model(tiny_cfg("seed=5"), d_input=4)
    assert any(not np.array_equal(p.data, diff_seed.store[name].data)
               for name, p in m32.store.items())


# ---------------------------------------------------------------------------
# Checkpoints


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    cfg = tiny_cfg()
    model = build_model(cfg, d_input=4)
    adam = AdamwState(model.store)
    adam.step = 17
    gen = np.random.default_rng(1)
    for name in model.store.names():
        adam.m[name][:] = gen.standard_normal(adam.m[name].shape)
        adam.v[name][:] = gen.random(adam.v[name].shape)
    path = tmp_path / "model.ckpt.npz"
    save_checkpoint(path, model, adam, cfg, epoch=3,
                    rng_states={"train": SeededRng(0).state()},
                    extra={"best_val_loss": 1.25})

    model2, adam2, cfg2, meta = load_checkpoint(path)
    assert cfg2.config_hash() == cfg.config_hash()
    assert meta["epoch"] == 3 and adam2.step == 17
    assert meta["extra"]["best_val_loss"] == 1.25
    for name, p in model.store.items():
        assert p.data.tobytes() == model2.store[name].data.tobytes()
        assert adam.m[name].tobytes() == adam2.m[name].tobytes()
        assert adam.v[name].tobytes() == adam2.v[name].tobytes()


def test_checkpoint_rejects_wrong_version(tmp_path):
    cfg = tiny_cfg()
    model = build_model(cfg, d_input=4)
    path = tmp_path / "model.ckpt.npz"
    save_checkpoint(path, model, AdamwState(model.store), cfg, epoch=0,
                    rng_states={})
    with np.load(path) as data:
        arrays = {k: data[k] for k in data.files}
    meta = json.loads(bytes(arrays["__meta__"].tobytes()).decode())
    meta["format_version"] = 99
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **arrays)
    with pytest.raises(ValueError, match="format"):
        load_checkpoint(path)


def test_checkpoint_rejects_foreign_npz_and_missing_file(tmp_path):
    path = tmp_path / "other.npz"
    np.savez(path, a=np.zeros(3))
    with pytest.raises(ValueError, match="not a checkpoint"):
        load_checkpoint(path)
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "absent.npz")


# ---------------------------------------------------------------------------
# Validation split


def test_split_validation_partitions_exactly():
    insts = _instances([2] * 10)
    train_set, val_set = split_validation(insts, 0.2, SeededRng(4))
    assert len(val_set) == 2 and len(train_set) == 8
    assert {id(i) for i in train_set} | {id(i) for i in val_set} == {id(i) for i in insts}
    assert not ({id(i) for i in train_set} & {id(i) for i in val_set})


def test_split_validation_zero_fraction_and_determinism():
    insts = _instances([2] * 7)
    train_set, val_set = split_validation(insts, 0.0, SeededRng(5))
    assert val_set == [] and len(train_set) == 7
    a = split_validation(insts, 0.3, SeededRng(6))
    b = split_validation(insts, 0.3, SeededRng(6))
    assert [id(i) for i in a[1]] == [id(i) for i in b[1]]
    with pytest.raises(ValueError, match="fraction"):
        split_validation(insts, 1.0, SeededRng(7))


# ---------------------------------------------------------------------------
# Dataset construction


def test_build_instances_eval_split_uses_its_own_range():
    cfg = tiny_cfg("data.eval_n_min=4", "data.eval_n_max=5", "data.eval_count=9")
    rng = SeededRng(0)
    train_set = build_instances(cfg.data, rng.derive(1), split="train")
    eval_set = build_instances(cfg.data, rng.derive(5), split="eval")
    assert len(train_set) == 24 and all(1 <= 3 * 1 <= inst.n <= 9 for inst in train_set)
    assert len(eval_set) == 9 and all(12 <= inst.n <= 15 for inst in eval_set)


def test_build_instances_rejects_unknown_split():
    cfg = tiny_cfg()
    with pytest.raises(ValueError, match="split"):
        build_instances(cfg.data, SeededRng(0), split="test")


def test_build_instances_tsp_eval_beyond_oracle_drops_targets():
    cfg = load_config(overrides=[
        "data.task=tsp", "data.n_min=5", "data.n_max=6", "data.count=4",
        "data.eval_count=3", "data.eval_n_min=15", "data.eval_n_max=15"])
    eval_set = build_instances(cfg.data, SeededRng(1), split="eval")
    assert all(inst.target is None for inst in eval_set)
    assert all(inst.n == 15 for inst in eval_set)


# ---------------------------------------------------------------------------
# Training loop


def test_train_smoke_writes_logs_and_checkpoints(tmp_path):
    cfg = tiny_cfg()
    result = train(cfg, tmp_path / "run")
    assert result.epochs_run == 2 and not result.stopped_early
    assert result.log_path.exists()
    assert result.last_checkpoint.exists() and result.best_checkpoint.exists()
    events = [json.loads(l) for l in result.log_path.read_text().splitlines()]
    kinds = [e["event"] for e in events]
    assert kinds[0] == "config" and kinds[-1] == "done"
    assert kinds.count("epoch") == 2
    assert all(math.isfinite(e["train_loss"]) for e in events if e["event"] == "epoch")
    assert events[0]["n_params"] > 0
    model, adam, cfg2, meta = load_checkpoint(result.last_checkpoint)
    assert meta["epoch"] == 1 and cfg2.config_hash() == cfg.config_hash()


def test_same_seed_runs_are_bit_identical(tmp_path):
    cfg = tiny_cfg()
    r1 = train(cfg, tmp_path / "a")
    r2 = train(tiny_cfg(), tmp_path / "b")
    assert r1.log_path.read_bytes() == r2.log_path.read_bytes()
    m1, a1, _, _ = load_checkpoint(r1.last_checkpoint)
    m2, a2, _, _ = load_checkpoint(r2.last_checkpoint)
    for name, p in m1.store.items():
        assert p.data.tobytes() == m2.store[name].data.tobytes()
        assert a1.m[name].tobytes() == a2.m[name].tobytes()


def test_different_seeds_diverge(tmp_path):
    r1 = train(tiny_cfg(), tmp_path / "a")
    r2 = train(tiny_cfg("seed=1"), tmp_path / "b")
    l1 = [e for e in map(json.loads, r1.log_path.read_text().splitlines())
          if e["event"] == "epoch"]
    l2 = [e for e in map(json.loads, r2.log_path.read_text().splitlines())
          if e["event"] == "epoch"]
    assert l1[0]["train_loss"] != l2[0]["train_loss"]


def test_resume_matches_uninterrupted_run(tmp_path):
    cfg4 = tiny_cfg("optim.epochs=4")
    straight = train(cfg4, tmp_path / "straight")

    class StopAfter:
        def __init__(self, epoch):
            self.epoch = epoch

        def __call__(self, event):
            if event.get("event") == "epoch" and event["epoch"] == self.epoch:
                raise KeyboardInterrupt

    interrupted_dir = tmp_path / "interrupted"
    with pytest.raises(KeyboardInterrupt):
        train(tiny_cfg("optim.epochs=4"), interrupted_dir, log_fn=StopAfter(1))
    resumed = train(tiny_cfg("optim.epochs=4"), interrupted_dir,
                    resume=interrupted_dir / "last.ckpt.npz")
    assert resumed.epochs_run == 2  # epochs 2 and 3

    m1, a1, _, _ = load_checkpoint(straight.last_checkpoint)
    m2, a2, _, meta2 = load_checkpoint(resumed.last_checkpoint)
    assert meta2["epoch"] == 3
    for name, p in m1.store.items():
        assert p.data.tobytes() == m2.store[name].data.tobytes()
        assert a1.v[name].tobytes() == a2.v[name].tobytes()


def test_resume_refuses_mismatched_config(tmp_path):
    result = train(tiny_cfg(), tmp_path / "run")
    with pytest.raises(ValueError, match="config mismatch"):
        train(tiny_cfg("optim.lr=9e-4"), tmp_path / "run",
              resume=result.last_checkpoint)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises_and_keeps_checkpoint(tmp_path):
    cfg = tiny_cfg("optim.lr=1e30", "optim.clip_norm=1e30")
    with pytest.raises(DivergenceError) as exc_info:
        train(cfg, tmp_path / "run")
    ckpt = exc_info.value.last_checkpoint
    assert ckpt.exists()
    model, _, _, meta = load_checkpoint(ckpt)  # still loadable
    events = [json.loads(l) for l in (tmp_path / "run" / "train_log.jsonl").read_text().splitlines()]
    assert any(e["event"] == "divergence" for e in events)


def test_early_stop_on_metric(tmp_path):
    cfg = tiny_cfg("optim.epochs=5", "optim.stop_metric=validity",
                   "optim.stop_value=0.0")
    result = train(cfg, tmp_path / "run")
    assert result.stopped_early and result.epochs_run == 1
    events = [json.loads(l) for l in result.log_path.read_text().splitlines()]
    assert any(e["event"] == "early_stop" for e in events)


def test_metric_direction_table():
    assert _metric_reached("loss", 0.5, 1.0)
    assert not _metric_reached("loss", 2.0, 1.0)
    assert _metric_reached("validity", 96.0, 95.0)
    assert not _metric_reached("validity", 90.0, 95.0)
    assert "tour_ratio" in LOWER_IS_BETTER and "loss" in LOWER_IS_BETTER


def test_train_requires_targets(tmp_path):
    cfg = load_config(overrides=TINY + [
        "data.task=tsp", "data.n_min=4", "data.n_max=5", "data.with_targets=false"])
    with pytest.raises(ValueError, match="target"):
        train(cfg, tmp_path / "run")


# ---------------------------------------------------------------------------
# Evaluation


def _trained_tiny(tmp_path, *extra):
    cfg = tiny_cfg(*extra)
    result = train(cfg, tmp_path / "run")
    model, _, _, _ = load_checkpoint(result.best_checkpoint)
    return cfg, model


def test_evaluate_grammar_metrics(tmp_path):
    cfg, model = _trained_tiny(tmp_path)
    eval_set = build_instances(cfg.data, SeededRng(0).derive(5), split="eval")
    summary = evaluate_instances(model, eval_set)
    assert summary["count"] == 6
    for key in ("validity", "tau", "pmr"):
        assert key in summary and math.isfinite(summary[key])
    assert 0.0 <= summary["validity"] <= 100.0
    assert -100.0 <= summary["tau"] <= 100.0


def test_evaluate_tsp_metrics_and_ratio():
    cfg = load_config(overrides=TINY + [
        "data.task=tsp", "data.n_min=4", "data.n_max=5", "data.eval_count=8"])
    model = build_model(cfg, d_input=2)
    eval_set = build_instances(cfg.data, SeededRng(0).derive(5), split="eval")
    summary = evaluate_instances(model, eval_set)
    assert summary["tour_ratio"] >= 1.0 - 1e-9
    assert summary["mean_instance_ratio"] >= 1.0 - 1e-9
    assert summary["tour_length"] >= summary["optimal_length"] - 1e-9
    assert "tau" in summary and "pmr" in summary


def test_evaluate_rejects_width_mismatch():
    cfg = tiny_cfg()
    model = build_model(cfg, d_input=7)
    eval_set = build_instances(cfg.data, SeededRng(0).derive(5), split="eval")
    with pytest.raises(ValueError, match="width"):
        evaluate_instances(model, eval_set)
    with pytest.raises(ValueError, match="zero"):
        evaluate_instances(model, [])


def test_decode_dataset_and_loss_are_deterministic(tmp_path):
    cfg, model = _trained_tiny(tmp_path)
    eval_set = build_instances(cfg.data, SeededRng(0).derive(5), split="eval")
    preds1 = decode_dataset(model, eval_set)
    preds2 = decode_dataset(model, eval_set)
    assert preds1 == preds2
    for pred, inst in zip(preds1, eval_set):
        assert sorted(pred) == list(range(inst.n))
    l1 = dataset_loss(model, eval_set, 0.1)
    l2 = dataset_loss(model, eval_set, 0.1)
    assert l1 == l2 and math.isfinite(l1)


def test_evaluation_report_rows(tmp_path):
    cfg, model = _trained_tiny(tmp_path)
    eval_set = build_instances(cfg.data, SeededRng(0).derive(5), split="eval")
    report = evaluation_report(model, eval_set, config_hash="cafe01", group="g")
    metrics = {row.metric for row in report.rows}
    assert metrics == {"tau", "pmr", "validity"}
    row = report.get("grammar:anbncn", "validity", group="g")
    assert row.count == 6 and row.config_hash == "cafe01"


# ---------------------------------------------------------------------------
# CLI


def test_cli_generate_and_eval_round_trip(tmp_path):
    data_path = tmp_path / "train.jsonl"
    rc = cli_main(["generate", "--out", str(data_path),
                   *sum((["--override", o] for o in TINY), [])])
    assert rc == 0
    insts = load_dataset(data_path)
    assert len(insts) == 24

    run_dir = tmp_path / "run"
    rc = cli_main(["train", "--out", str(run_dir),
                   *sum((["--override", o] for o in TINY), [])])
    assert rc == 0

    out_dir = tmp_path / "eval"
    rc = cli_main(["eval", "--ckpt", str(run_dir / "best.ckpt.npz"),
                   "--out", str(out_dir)])
    assert rc == 0
    assert (out_dir / "eval_report.jsonl").exists()
    assert (out_dir / "eval_report.csv").exists()

    report_dir = tmp_path / "figures"
    rc = cli_main(["report", "--input", str(run_dir / "train_log.jsonl"),
                   "--out", str(report_dir)])
    assert rc == 0
    assert (report_dir / "training_curves.csv").exists()
    assert (report_dir / "loss_curve.png").exists()


def test_cli_config_error_exit_code(tmp_path):
    rc = cli_main(["train", "--out", str(tmp_path / "x"),
                   "--override", "optim.bogus=1"])
    assert rc == 2


def test_cli_value_error_exit_code(tmp_path):
    rc = cli_main(["eval", "--ckpt", str(tmp_path / "missing.npz"),
                   "--out", str(tmp_path / "out")])
    assert rc == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_divergence_exit_code(tmp_path):
    rc = cli_main(["train", "--out", str(tmp_path / "run"),
                   *sum((["--override", o] for o in TINY), []),
                   "--override", "optim.lr=1e30",
                   "--override", "optim.clip_norm=1e30"])
    assert rc == 1


def test_cli_gradcheck_tiny_model_passes(tmp_path):
    rc = cli_main(["gradcheck", "--n-elements", "3", "--d-input", "2",
                   "--max-coords", "2",
                   *sum((["--override", o] for o in
                         ["model.d_model=16", "model.n_heads=2",
                          "model.n_sit_layers=1", "optim.dropout=0.0"]), [])])
    assert rc == 0


def test_recipe_ablation_smoke(tmp_path):
    from set2seq.harness.recipes import run_recipe

    result = run_recipe(
        "ablation", tmp_path, seeds=(0,),
        overrides=["model.d_model=16", "model.n_heads=2", "model.n_sit_layers=1",
                   "optim.epochs=1", "optim.batch_size=8", "data.count=24",
                   "data.eval_count=8", "data.card_min=4", "data.card_max=5"])
    assert (tmp_path / "ablation.csv").exists()
    assert (tmp_path / "ablation_runs.jsonl").exists()
    mean_delta, std_delta = result["validity_delta"]
    assert math.isfinite(mean_delta) and std_delta == 0.0  # one seed
    records = [json.loads(l)
               for l in (tmp_path / "ablation_runs.jsonl").read_text().splitlines()]
    assert {r["variant"] for r in records} == {"augmented", "plain"}
    assert {r["metric"] for r in records} == {"validity", "tau", "pmr"}
    rows = (tmp_path / "ablation.csv").read_text().splitlines()
    assert rows[0] == "variant,validity,tau,pmr" and len(rows) == 4


def test_cli_recipe_smoke(tmp_path):
    rc = cli_main([
        "recipe", "ablation", "--out", str(tmp_path), "--seeds", "0",
        *sum((["--override", o] for o in
              ["model.d_model=16", "model.n_heads=2", "model.n_sit_layers=1",
               "optim.epochs=1", "optim.batch_size=8", "data.count=24",
               "data.eval_count=8", "data.card_min=4", "data.card_max=5"]), [])])
    assert rc == 0
    assert (tmp_path / "ablation.csv").exists()


def test_cli_eval_with_data_override(tmp_path):
    run_dir = tmp_path / "run"
    assert cli_main(["train", "--out", str(run_dir),
                     *sum((["--override", o] for o in TINY), [])]) == 0
    out_dir = tmp_path / "eval"
    rc = cli_main(["eval", "--ckpt", str(run_dir / "best.ckpt.npz"),
                   "--out", str(out_dir), "--override", "data.eval_count=4"])
    assert rc == 0
    rows = [json.loads(l) for l in (out_dir / "eval_report.jsonl").read_text().splitlines()]
    assert all(r["count"] == 4 for r in rows)
