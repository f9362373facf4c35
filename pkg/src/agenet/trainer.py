"""Training loop, evaluation, and checkpoint persistence.

Protocol: shuffled mini-batches (last partial batch kept), forward, summed
loss, backward, one Adam step per batch; after every epoch the validation
MAE is computed on deterministic center crops and the model is persisted iff
it is strictly better than the best recorded so far. Everything is driven by
named RNG streams derived from the config seed, so a (seed, config) pair
fully determines the metrics log.

Checkpoint container: magic ``AGN1``, format version and record count as
32-bit little-endian unsigned ints, then per parameter record: name length
(u32), UTF-8 name, rank (u32), dims (u64 each), float64 values row-major.
A length-prefixed UTF-8 JSON blob with the config snapshot, best validation
MAE, and epoch index follows the records.
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor import Tensor, backward, no_grad
from .optim import Adam
from .ranking import (IntervalPoints, LossKind, baseline_loss, ecr_loss,
                      encode_ages, mae, make_interval_points)
from .network import PRESETS, NetworkConfig
from .attributes import (AttributeLabels, AttributeSchema, SCHEMAS,
                         age_group_bin, attr_loss, total_loss)
from .model import AgeModel
from .data import (ManifestEntry, Sample, SyntheticSpec, center_crop,
                   load_manifest, random_crop, read_image, split_811,
                   synth_split)

__all__ = [
    "TrainConfig",
    "TrainResult",
    "EvalReport",
    "TrainingDiverged",
    "CHECKPOINT_MAGIC",
    "train",
    "evaluate_model",
    "evaluate_checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "build_model",
    "load_dataset",
]

CHECKPOINT_MAGIC = b"AGN1"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 0.0005
    seed: int = 0
    loss_kind: LossKind = LossKind.ECR
    attribute_guidance: bool = True
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    preset: str = "desk"
    schema_name: str = "morph"
    schema: AttributeSchema = SCHEMAS["morph"]
    a_min: int = 16
    a_max: int = 77
    crop: int = 64
    fuse_kernel: int = 3
    synthetic: SyntheticSpec | None = None
    manifest: str | None = None

    def __post_init__(self):
        if min(self.epochs, self.batch_size) < 1 or self.learning_rate < 0:
            raise ValueError("epochs and batch_size must be positive, learning_rate >= 0")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}, have {sorted(PRESETS)}")
        if self.a_min >= self.a_max:
            raise ValueError(f"need a_min < a_max, got {self.a_min} >= {self.a_max}")
        if self.synthetic is None and self.manifest is None:
            raise ValueError("config needs either a synthetic spec or a manifest path")
        if self.synthetic is not None and self.crop > self.synthetic.resolution:
            raise ValueError(
                f"crop {self.crop} exceeds synthetic resolution {self.synthetic.resolution}")

    @property
    def guided(self) -> bool:
        """Effective guidance: zero coefficients switch the module off, which
        keeps its parameters frozen at init (the ablation baseline)."""
        return self.attribute_guidance and (self.alpha, self.beta, self.gamma) != (0.0, 0.0, 0.0)

    @property
    def network(self) -> NetworkConfig:
        return PRESETS[self.preset]

    @property
    def points(self) -> IntervalPoints:
        return make_interval_points(self.a_min, self.a_max)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["loss_kind"] = self.loss_kind.value
        d["schema"] = dataclasses.asdict(self.schema)
        d["schema"]["group_boundaries"] = list(self.schema.group_boundaries)
        if self.synthetic is not None:
            d["synthetic"] = dataclasses.asdict(self.synthetic)
            d["synthetic"]["counts"] = list(self.synthetic.counts)
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        d["loss_kind"] = LossKind(d["loss_kind"])
        sch = dict(d["schema"])
        sch["group_boundaries"] = tuple(sch["group_boundaries"])
        d["schema"] = AttributeSchema(**sch)
        if d.get("synthetic") is not None:
            syn = dict(d["synthetic"])
            syn["counts"] = tuple(syn["counts"])
            d["synthetic"] = SyntheticSpec(**syn)
        return TrainConfig(**d)


@dataclass
class Dataset:
    train: list[Sample]
    val: list[Sample]
    test: list[Sample]

    def split(self, name: str) -> list[Sample]:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def _manifest_samples(entries: list[ManifestEntry], root: Path) -> list[Sample]:
    return [Sample(image=read_image(root / e.path), age=e.age,
                   gender=e.gender, ethnicity=e.ethnicity) for e in entries]


def load_dataset(cfg: TrainConfig) -> Dataset:
    if cfg.synthetic is not None:
        return Dataset(train=synth_split(cfg.synthetic, "train"),
                       val=synth_split(cfg.synthetic, "val"),
                       test=synth_split(cfg.synthetic, "test"))
    path = Path(cfg.manifest)
    eth = max(cfg.schema.ethnicity_classes, 1)
    entries = load_manifest(path, a_min=cfg.a_min, a_max=cfg.a_max,
                            gender_classes=cfg.schema.gender_classes,
                            ethnicity_classes=eth)
    train_e, val_e, test_e = split_811(entries, cfg.seed)
    root = path.parent
    return Dataset(train=_manifest_samples(train_e, root),
                   val=_manifest_samples(val_e, root),
                   test=_manifest_samples(test_e, root))


def build_model(cfg: TrainConfig) -> AgeModel:
    out_dim = cfg.points.k if cfg.loss_kind == LossKind.MULTICLASS_CE else 1
    model = AgeModel(cfg.network, cfg.schema, cfg.seed, out_dim=out_dim,
                     fuse_kernel=cfg.fuse_kernel)
    model.init_output_bias((cfg.a_min + cfg.a_max) / 2.0)
    return model


def _attribute_labels(samples: list[Sample], schema: AttributeSchema) -> list[AttributeLabels]:
    return [AttributeLabels(gender=s.gender, ethnicity=s.ethnicity,
                            age_group=age_group_bin(s.age, schema)).validate(schema)
            for s in samples]


def _predict(model: AgeModel, samples: list[Sample], cfg: TrainConfig,
             collect_logits: bool = False):
    """Deterministic center-cropped forward pass; returns predicted ages and
    optionally the attribute branch argmaxes."""
    preds = np.empty(len(samples))
    branch_hits = {"gender": [], "agegroup": [], "ethnicity": []}
    with no_grad():
        for start in range(0, len(samples), 64):
            chunk = samples[start:start + 64]
            x = Tensor(np.stack([center_crop(s.image, cfg.crop) for s in chunk]))
            out, logits = model.forward(x, cfg.guided)
            if cfg.loss_kind == LossKind.MULTICLASS_CE:
                preds[start:start + len(chunk)] = cfg.a_min + np.argmax(out.data, axis=1)
            else:
                preds[start:start + len(chunk)] = out.data
            if collect_logits and logits is not None:
                gl, al, el = logits
                branch_hits["gender"].append(np.argmax(gl.data, axis=1))
                branch_hits["agegroup"].append(np.argmax(al.data, axis=1))
                if el is not None:
                    branch_hits["ethnicity"].append(np.argmax(el.data, axis=1))
    return preds, branch_hits


def _val_mae(model: AgeModel, samples: list[Sample], cfg: TrainConfig) -> float:
    preds, _ = _predict(model, samples, cfg)
    return mae(preds, [s.age for s in samples])


@dataclass
class TrainResult:
    model: AgeModel
    best_state: "OrderedDict[str, np.ndarray]"
    best_val_mae: float
    best_epoch: int
    metrics: list[dict]
    checkpoint_path: Path | None = None


def train(cfg: TrainConfig, out_dir: str | Path | None = None,
          dataset: Dataset | None = None) -> TrainResult:
    data = dataset if dataset is not None else load_dataset(cfg)
    if not data.train or not data.val:
        raise ValueError("training requires non-empty train and val splits")
    points = cfg.points
    model = build_model(cfg)
    guided = cfg.guided
    opt = Adam(list(model.trainable_parameters(guided).values()), lr=cfg.learning_rate)

    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    crop_rng = np.random.default_rng([cfg.seed, 2])

    ages = np.array([s.age for s in data.train])
    y_all = encode_ages(ages, points) if cfg.loss_kind == LossKind.ECR else None
    labels_all = _attribute_labels(data.train, cfg.schema)

    out_dir = Path(out_dir) if out_dir is not None else None
    ckpt_path = out_dir / "checkpoint.agn" if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    best = float("inf")
    best_state = model.state()
    best_epoch = -1
    metrics: list[dict] = []
    n = len(data.train)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            images = np.stack([random_crop(data.train[i].image, cfg.crop, crop_rng)
                               for i in idx])
            x = Tensor(images)
            out, logits = model.forward(x, guided)
            batch_ages = ages[idx]
            if cfg.loss_kind == LossKind.ECR:
                loss = ecr_loss(out, y_all[idx], points)
            else:
                loss = baseline_loss(cfg.loss_kind, out, batch_ages, points)
            if guided:
                batch_labels = [labels_all[i] for i in idx]
                loss = total_loss(loss, attr_loss(logits, batch_labels, cfg.schema,
                                                  cfg.alpha, cfg.beta, cfg.gamma))
            if not np.isfinite(loss.data):
                raise TrainingDiverged(epoch, bi)
            opt.zero_grad()
            backward(loss)
            opt.step()
            epoch_loss += float(loss.data)
        val = _val_mae(model, data.val, cfg)
        retained = val < best
        if retained:
            best = val
            best_epoch = epoch
            best_state = model.state()
            if ckpt_path:
                save_checkpoint(best_state, _meta(cfg, best, epoch), ckpt_path)
        metrics.append({"epoch": epoch, "train_loss": epoch_loss / n,
                        "val_mae": val, "retained": retained})
    if out_dir:
        _write_metrics(out_dir / "metrics.jsonl", metrics)
    return TrainResult(model=model, best_state=best_state, best_val_mae=best,
                       best_epoch=best_epoch, metrics=metrics, checkpoint_path=ckpt_path)


def _write_metrics(path: Path, metrics: list[dict]) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for rec in metrics:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    mae: float
    count: int
    group_mae: dict[int, float] = field(default_factory=dict)
    gender_acc: float | None = None
    agegroup_acc: float | None = None
    ethnicity_acc: float | None = None


def evaluate_model(model: AgeModel, samples: list[Sample], cfg: TrainConfig) -> EvalReport:
    if not samples:
        raise ValueError("cannot evaluate an empty split")
    labels = _attribute_labels(samples, cfg.schema)  # raises on schema mismatch
    ages = np.array([s.age for s in samples], dtype=np.float64)
    preds, hits = _predict(model, samples, cfg, collect_logits=True)
    report = EvalReport(mae=mae(preds, ages), count=len(samples))
    groups = np.array([lab.age_group for lab in labels])
    for g in sorted(set(groups.tolist())):
        mask = groups == g
        report.group_mae[g] = mae(preds[mask], ages[mask])
    if cfg.guided and hits["gender"]:
        gp = np.concatenate(hits["gender"])
        ap = np.concatenate(hits["agegroup"])
        report.gender_acc = float(np.mean(gp == [lab.gender for lab in labels]))
        report.agegroup_acc = float(np.mean(ap == groups))
        if hits["ethnicity"]:
            ep = np.concatenate(hits["ethnicity"])
            report.ethnicity_acc = float(np.mean(ep == [lab.ethnicity for lab in labels]))
    return report


def evaluate_checkpoint(path: str | Path, split: str = "test",
                        dataset: Dataset | None = None) -> EvalReport:
    state, meta = load_checkpoint(path)
    cfg = TrainConfig.from_dict(meta["config"])
    model = build_model(cfg)
    model.load_state(state)
    data = dataset if dataset is not None else load_dataset(cfg)
    return evaluate_model(model, data.split(split), cfg)


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------

def _meta(cfg: TrainConfig, best_val_mae: float, epoch: int) -> dict:
    return {"config": cfg.to_dict(), "best_val_mae": best_val_mae, "epoch": epoch}


def save_checkpoint(state: "OrderedDict[str, np.ndarray]", meta: dict,
                    path: str | Path) -> None:
    """Write the bit-exact container atomically (temp file then rename)."""
    path = Path(path)
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<II", CHECKPOINT_VERSION, len(state))
    for name, arr in state.items():
        nb = name.encode("utf-8")
        blob += struct.pack("<I", len(nb)) + nb
        blob += struct.pack("<I", arr.ndim)
        blob += np.array(arr.shape, dtype="<u8").tobytes()
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    mb = json.dumps(meta, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(mb)) + mb
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(bytes(blob))
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> tuple["OrderedDict[str, np.ndarray]", dict]:
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    view = memoryview(blob)
    if view[:4].tobytes() != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {view[:4].tobytes()!r}")
    version, count = struct.unpack_from("<II", view, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    state: "OrderedDict[str, np.ndarray]" = OrderedDict()
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", view, off)
            off += 4
            name = view[off:off + nlen].tobytes().decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", view, off)
            off += 4
            dims = np.frombuffer(view, dtype="<u8", count=rank, offset=off)
            off += 8 * rank
            size = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(view, dtype="<f8", count=size, offset=off)
            off += 8 * size
            state[name] = arr.reshape(dims.astype(int)).copy()
        (mlen,) = struct.unpack_from("<I", view, off)
        off += 4
        meta = json.loads(view[off:off + mlen].tobytes().decode("utf-8"))
        if off + mlen != len(blob):
            raise ValueError("trailing bytes")
    except (struct.error, ValueError) as exc:
        raise ValueError(f"{path}: truncated or corrupt checkpoint ({exc})") from None
    return state, meta
