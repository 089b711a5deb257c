"""Run configuration and the generate/render/infer/score/analyze stages.

Everything a stage writes lives under ``RunConfig.out``::

    datasets/<name>.jsonl (+ .manifest.json)
    images/<mode>/<name>/<instance id>.png
    inference/<name>_<condition>.jsonl      # also the resume checkpoint
    eval/<name>_<condition>.jsonl
    report/
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import analytics
from .client import EndpointConfig, InferenceRecord, InferenceRequest, RecordLog, run_batch
from .datagen import Dataset, DatasetSpec, build_dataset, export_dataset, load_dataset
from .evaluate import NO_RESPONSE, aggregate_accuracy, malformed, read_records, score_instance, write_records
from .render import (FlowRenderSpec, GridRenderSpec, MatrixRenderSpec, derive_flow_canvas_width,
                     render_flow, render_grid, render_matrix)
from .tasks import Tolerances
from .textio import CONDITIONS, PromptTemplates, build_prompt, parse_response, serialize_matrix

log = logging.getLogger(__name__)

RENDER_MODES = ("native", "matrix", "grid", "flow")


class ConfigError(ValueError):
    pass


@dataclass
class DatasetEntry:
    spec: DatasetSpec
    name: str


@dataclass
class RunConfig:
    datasets: list[DatasetEntry]
    out: Path = Path("runs/default")
    master_seed: int = 0
    matrix_render: MatrixRenderSpec = field(default_factory=MatrixRenderSpec)
    grid_render: GridRenderSpec = field(default_factory=GridRenderSpec)
    flow_render: FlowRenderSpec = field(default_factory=FlowRenderSpec)
    prompts: Path | None = None
    endpoint: EndpointConfig = field(default_factory=EndpointConfig)
    parallelism: int = 4
    tolerances: Tolerances = field(default_factory=Tolerances)
    eval_split: str = "test"  # "train", "test" or "all"

    def templates(self) -> PromptTemplates:
        return PromptTemplates(self.prompts)

    def select(self, task: str | None = None, size: int | None = None) -> list[DatasetEntry]:
        out = []
        for e in self.datasets:
            if task is not None and e.spec.task != task:
                continue
            if size is not None:
                if size not in e.spec.sizes:
                    continue
                e = _restrict(e, size)
            out.append(e)
        return out

    def dataset_path(self, name: str) -> Path:
        return self.out / "datasets" / f"{name}.jsonl"

    def image_path(self, mode: str, name: str, instance_id: str) -> Path:
        return self.out / "images" / mode / name / f"{instance_id}.png"

    def inference_path(self, name: str, condition: str) -> Path:
        return self.out / "inference" / f"{name}_{condition}.jsonl"

    def eval_path(self, name: str, condition: str) -> Path:
        return self.out / "eval" / f"{name}_{condition}.jsonl"

    @property
    def report_dir(self) -> Path:
        return self.out / "report"


def _restrict(e: DatasetEntry, size: int) -> DatasetEntry:
    keys = list(e.spec.sizes)
    mix = None
    if e.spec.mix_ratio is not None:
        mix = [e.spec.mix_ratio[keys.index(size)]]
    spec = replace(e.spec, sizes={size: e.spec.sizes[size]}, mix_ratio=mix)
    return DatasetEntry(spec, f"{e.name}-{size}")


def _spec_from(cls, d: Mapping[str, Any] | None):
    d = dict(d or {})
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    for k, v in d.items():
        if k.endswith("_color"):
            d[k] = tuple(v)
    try:
        return cls(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{cls.__name__}: {e}") from e


def config_from_dict(raw: Mapping[str, Any], base_dir: Path | None = None,
                     **overrides) -> RunConfig:
    base_dir = base_dir or Path.cwd()
    raw = dict(raw)
    seed = overrides.get("seed")
    master_seed = int(seed if seed is not None else raw.get("master_seed", 0))
    entries = []
    for d in raw.get("datasets") or []:
        try:
            spec = DatasetSpec(task=d["task"], sizes=d["sizes"], mix_ratio=d.get("mix_ratio"),
                               split_ratio=tuple(d.get("split_ratio", (5, 1))),
                               master_seed=master_seed)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad dataset entry {d!r}: {e}") from e
        name = d.get("name") or (f"{spec.task}-mixed" if spec.mixed else spec.task)
        entries.append(DatasetEntry(spec, name))
    if not entries:
        raise ConfigError("config lists no datasets")
    if len({e.name for e in entries}) != len(entries):
        raise ConfigError("dataset names must be unique")

    render = raw.get("render") or {}
    prompts = raw.get("prompts")
    if prompts is not None:
        prompts = (base_dir / prompts).resolve()
        if not prompts.is_file():
            raise ConfigError(f"prompt template not found: {prompts}")
    out = overrides.get("out") or raw.get("out", "runs/default")
    endpoint = dict(raw.get("endpoint") or {})
    parallelism = int(endpoint.pop("parallelism", raw.get("parallelism", 4)))
    split = raw.get("eval_split", "test")
    if split not in ("train", "test", "all"):
        raise ConfigError(f"eval_split must be train, test or all, not {split!r}")
    return RunConfig(
        datasets=entries,
        out=(base_dir / out).resolve() if not Path(out).is_absolute() else Path(out),
        master_seed=master_seed,
        matrix_render=_spec_from(MatrixRenderSpec, render.get("matrix")),
        grid_render=_spec_from(GridRenderSpec, render.get("grid")),
        flow_render=_spec_from(FlowRenderSpec, render.get("flow")),
        prompts=prompts,
        endpoint=_spec_from(EndpointConfig, endpoint),
        parallelism=parallelism,
        tolerances=_spec_from(Tolerances, raw.get("tolerances")),
        eval_split=split,
    )


def load_config(path: str | Path, **overrides) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path} must hold a mapping")
    return config_from_dict(raw, path.parent, **overrides)


def eval_instances(cfg: RunConfig, ds: Dataset):
    return list(ds) if cfg.eval_split == "all" else ds.split(cfg.eval_split)


def load_entry(cfg: RunConfig, entry: DatasetEntry) -> Dataset:
    path = cfg.dataset_path(entry.name)
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run `generate` first")
    return load_dataset(path)


# stages ----------------------------------------------------------------------

def generate(cfg: RunConfig, task: str | None = None, size: int | None = None) -> list[Path]:
    paths = []
    for e in cfg.select(task, size):
        ds = build_dataset(e.spec)
        path = cfg.dataset_path(e.name)
        manifest = export_dataset(ds, path)
        log.info("%s: %s instances, sha256 %s", e.name, manifest["counts"], manifest["sha256"][:12])
        paths.append(path)
    return paths


def native_mode(task: str) -> str:
    return "grid" if task == "life" else "matrix"


def render_instance(cfg: RunConfig, instance, mode: str = "native"):
    if mode == "native":
        mode = native_mode(instance.task)
    if mode == "grid":
        return render_grid(instance.input, cfg.grid_render)
    if mode == "matrix":
        return render_matrix(instance.input, cfg.matrix_render)
    if mode == "flow":
        width = derive_flow_canvas_width(instance.input, cfg.matrix_render)
        return render_flow(serialize_matrix(instance.input), width, cfg.flow_render)
    raise ValueError(f"unknown render mode {mode!r}")


def render(cfg: RunConfig, mode: str = "native", task: str | None = None,
           size: int | None = None) -> list[Path]:
    if mode not in RENDER_MODES:
        raise ValueError(f"render mode must be one of {RENDER_MODES}")
    paths = []
    for e in cfg.select(task, size):
        for inst in eval_instances(cfg, load_entry(cfg, e)):
            paths.append(render_instance(cfg, inst, mode).save(
                cfg.image_path(mode, e.name, inst.id)))
    return paths


def build_requests(cfg: RunConfig, entry: DatasetEntry, condition: str) -> list[InferenceRequest]:
    templates = cfg.templates()
    reqs = []
    for inst in eval_instances(cfg, load_entry(cfg, entry)):
        image = None
        ref = None
        if condition == "visual":
            path = cfg.image_path("native", entry.name, inst.id)
            if not path.exists():
                render_instance(cfg, inst).save(path)
            image, ref = path.read_bytes(), str(path.relative_to(cfg.out))
        bundle = build_prompt(inst, condition, templates, image_ref=ref)
        reqs.append(InferenceRequest.from_bundle(inst.id, bundle, image, cfg.endpoint))
    return reqs


def infer(cfg: RunConfig, condition: str, task: str | None = None, size: int | None = None,
          client=None) -> dict[str, list[InferenceRecord]]:
    if condition not in CONDITIONS:
        raise ValueError(f"condition must be one of {CONDITIONS}")
    out = {}
    for e in cfg.select(task, size):
        reqs = build_requests(cfg, e, condition)
        out[e.name] = run_batch(reqs, cfg.endpoint, cfg.parallelism,
                                checkpoint=cfg.inference_path(e.name, condition), client=client)
    return out


def score(cfg: RunConfig, condition: str, task: str | None = None,
          size: int | None = None) -> list[Path]:
    paths = []
    for e in cfg.select(task, size):
        ds = load_entry(cfg, e)
        responses = RecordLog(cfg.inference_path(e.name, condition)).load()
        records = []
        for inst in eval_instances(cfg, ds):
            rec = responses.get((inst.id, condition))
            if rec is None or rec.status != "ok":
                records.append(malformed(NO_RESPONSE, instance_id=inst.id, condition=condition,
                                         task=inst.task, size=inst.size))
                continue
            pred = parse_response(inst.task, rec.raw_response).value
            records.append(score_instance(inst, pred, condition, cfg.tolerances))
        paths.append(write_records(records, cfg.eval_path(e.name, condition)))
    return paths


def analyze(cfg: RunConfig, task: str | None = None, size: int | None = None) -> list[Path]:
    records = []
    for e in cfg.select(task, size):
        for cond in CONDITIONS:
            path = cfg.eval_path(e.name, cond)
            if path.exists():
                records += read_records(path)
    if not records:
        raise FileNotFoundError("no evaluation records found; run `score` first")
    acc = aggregate_accuracy(records)
    maps = analytics.heatmaps_by_group(records)
    diffs = []
    for (t, n, cond), h in maps.items():
        if cond == "text" and (t, n, "visual") in maps:
            diffs.append(analytics.heatmap_difference(h, maps[(t, n, "visual")]))
    paths = analytics.export_report([*maps.values(), *diffs], acc, cfg.report_dir)
    summary = cfg.report_dir / "summary.json"
    summary.write_text(json.dumps(
        [{"task": k[0], "size": k[1], "condition": k[2], "correct": v.correct,
          "total": v.total, "accuracy": v.accuracy} for k, v in acc.items()],
        indent=2) + "\n")
    return [*paths, summary]
