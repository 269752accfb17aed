"""Cascaded cropping regression: training, inference and the model file.

Each stage re-extracts features from the current crop of every image, fits
one boosted-fern regressor per crop coordinate against the remaining offset
to the ground truth, and moves the crop by ``lam`` times the prediction.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import cnn
from .boosting import PrimitiveRegressor, boost_fit
from .geometry import CropRegion, canonical_rows, full_frame, iou_many
from .imaging import Image

log = logging.getLogger(__name__)

FORMAT_NAME = "cascrop-model"
FORMAT_VERSION = 1

INIT_POLICIES = {"full": 1.0, "scale-0.5": 0.5, "scale-0.25": 0.25}


class ModelFileError(ValueError):
    """Base class for unreadable model files."""


class ModelVersionError(ModelFileError):
    pass


class ModelSchemaError(ModelFileError):
    pass


class ModelChecksumError(ModelFileError):
    pass


def init_policy(name) -> str:
    """Accept ``full``/``scale-0.5``/``scale-0.25`` or the bare factors 1.0/0.5/0.25."""
    if name in INIT_POLICIES:
        return name
    try:
        factor = float(name)
    except (TypeError, ValueError):
        raise ValueError(f"unknown initial-crop policy {name!r}") from None
    for key, f in INIT_POLICIES.items():
        if f == factor:
            return key
    raise ValueError(f"unknown initial-crop policy {name!r}")


def initial_crop(dims, policy: str = "full") -> CropRegion:
    return full_frame(dims).scaled(INIT_POLICIES[init_policy(policy)])


@dataclass(frozen=True)
class Hyper:
    T: int = 30
    S: int = 4
    M: int = 20
    Q: int = 64
    beta: float = 1.0
    lam: float = 0.8
    seed: int = 0
    val_fraction: float = 0.1
    patience: int | None = 3  # None trains all T stages
    init_crop: str = "full"

    def __post_init__(self):
        object.__setattr__(self, "init_crop", init_policy(self.init_crop))
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if not 1 <= self.S <= 8:
            raise ValueError("S must lie in [1, 8]")
        if self.M < 1 or self.Q < 1:
            raise ValueError("M and Q must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 or None")


@dataclass(frozen=True, eq=False)
class TrainSample:
    image: Image
    truth: CropRegion
    name: str = ""


@dataclass(eq=False)
class CascadeModel:
    stages: list[tuple[PrimitiveRegressor, ...]]
    hyper: Hyper
    extractor: cnn.ExtractorConfig
    stats: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.stages)

    @property
    def lam(self) -> float:
        return self.hyper.lam

    def truncated(self, n_stages: int) -> "CascadeModel":
        return CascadeModel(self.stages[:n_stages], self.hyper, self.extractor, dict(self.stats))


def stage_seed(seed: int, t: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, t, j]).generate_state(1)[0])


def extract_all(images, crops: np.ndarray, cfg: cnn.ExtractorConfig, threads: int = 1) -> np.ndarray:
    """Feature matrix ``(N, 928)`` for each image at its current crop."""
    jobs = [(img, CropRegion(*c)) for img, c in zip(images, crops)]
    if threads <= 1 or len(jobs) < 2:
        rows = [cnn.extract_features(img, c, cfg) for img, c in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(lambda job: cnn.extract_features(job[0], job[1], cfg), jobs))
    if not rows:
        return np.zeros((0, cnn.FEATURE_DIM))
    return np.stack(rows)


def apply_stage(stage, X: np.ndarray, crops: np.ndarray, lam: float) -> np.ndarray:
    out = crops.copy()
    for j, reg in enumerate(stage):
        out[:, j] += lam * reg.predict_many(X)
    return out


def _mean_iou(crops: np.ndarray, truth: np.ndarray) -> float | None:
    if len(crops) == 0:
        return None
    return float(iou_many(canonical_rows(crops), truth).mean())


def ccr_train(samples, hyper: Hyper = Hyper(), extractor: cnn.ExtractorConfig | None = None,
              threads: int = 1, progress=None) -> CascadeModel:
    """Train a cascade; ``progress(t, train_iou, val_iou)`` is called after each stage.

    A ``val_fraction`` share of the samples is held out.  When ``patience``
    is set, training stops once the mean validation IoU has not improved for
    that many stages, and the best-scoring prefix of stages is kept.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("ccr_train needs at least 2 samples")
    if extractor is None:
        extractor = cnn.seeded_config(hyper.seed)

    n = len(samples)
    order = np.random.default_rng(hyper.seed).permutation(n)
    n_val = int(round(hyper.val_fraction * n))
    n_val = min(n_val, n - 1)
    val_idx, train_idx = np.sort(order[:n_val]), np.sort(order[n_val:])
    tr = [samples[i] for i in train_idx]
    va = [samples[i] for i in val_idx]

    def start(group):
        return np.array([initial_crop(s.image.dims, hyper.init_crop) for s in group], dtype=np.float64).reshape(-1, 4)

    y_tr = np.array([s.truth for s in tr], dtype=np.float64)
    y_va = np.array([s.truth for s in va], dtype=np.float64).reshape(-1, 4)
    c_tr, c_va = start(tr), start(va)
    img_tr = [s.image for s in tr]
    img_va = [s.image for s in va]

    train_curve = [_mean_iou(c_tr, y_tr)]
    val_curve = [_mean_iou(c_va, y_va)]
    gammas, n_ferns = [], []
    stages = []
    best_t, best_val = 0, val_curve[0]
    use_val = n_val > 0 and hyper.patience is not None

    for t in range(1, hyper.T + 1):
        X = extract_all(img_tr, c_tr, extractor, threads)
        stage, stage_gamma, stage_ferns = [], [], []
        for j in range(4):
            reg, trace = boost_fit(X, y_tr[:, j] - c_tr[:, j], hyper.M, hyper.S, hyper.Q, hyper.beta,
                                   stage_seed(hyper.seed, t, j))
            stage.append(reg)
            stage_gamma.append(trace.gamma)
            stage_ferns.append(trace.n_accepted)
        stage = tuple(stage)
        stages.append(stage)
        gammas.append(stage_gamma)
        n_ferns.append(stage_ferns)
        c_tr = apply_stage(stage, X, c_tr, hyper.lam)
        if n_val:
            c_va = apply_stage(stage, extract_all(img_va, c_va, extractor, threads), c_va, hyper.lam)
        train_curve.append(_mean_iou(c_tr, y_tr))
        val_curve.append(_mean_iou(c_va, y_va))
        log.info("stage %d: train IoU %.4f, val IoU %s", t, train_curve[-1], val_curve[-1])
        if progress is not None:
            progress(t, train_curve[-1], val_curve[-1])
        if use_val:
            if val_curve[-1] > best_val:
                best_t, best_val = t, val_curve[-1]
            elif t - best_t >= hyper.patience:
                log.info("validation IoU flat for %d stages; keeping %d stages", hyper.patience, best_t)
                break
    keep = best_t if use_val else len(stages)
    stats = {
        "n_train": len(tr),
        "n_val": n_val,
        "train_iou": train_curve,
        "val_iou": val_curve,
        "gamma": gammas,
        "n_ferns": n_ferns,
        "stages_trained": len(stages),
        "stages_kept": keep,
    }
    return CascadeModel(stages[:keep], hyper, extractor, stats)


def ccr_predict(model: CascadeModel, img: Image) -> tuple[CropRegion, np.ndarray]:
    """Final canonical crop and the ``(T+1, 4)`` trajectory of raw crop states."""
    traj = ccr_predict_many(model, [img])[0]
    return CropRegion(*traj[-1]).canonical(), traj


def ccr_predict_many(model: CascadeModel, images, threads: int = 1) -> np.ndarray:
    """Trajectories ``(N, T+1, 4)``; stage 0 is the initial crop."""
    images = list(images)
    c = np.array([initial_crop(img.dims, model.hyper.init_crop) for img in images], dtype=np.float64).reshape(-1, 4)
    traj = [c]
    for stage in model.stages:
        X = extract_all(images, c, model.extractor, threads)
        c = apply_stage(stage, X, c, model.lam)
        traj.append(c)
    return np.stack(traj, axis=1)


# -- model file --------------------------------------------------------------


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _canonical_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def model_to_payload(model: CascadeModel) -> dict:
    return {
        "hyperparameters": asdict(model.hyper),
        "extractor": cnn.config_to_dict(model.extractor),
        "stages": [[reg.to_dict() for reg in stage] for stage in model.stages],
        "stats": model.stats,
    }


def model_from_payload(payload: dict) -> CascadeModel:
    try:
        hyper = Hyper(**payload["hyperparameters"])
        extractor = cnn.config_from_dict(payload["extractor"])
        stages = []
        for stage in payload["stages"]:
            if len(stage) != 4:
                raise ModelSchemaError(f"stage has {len(stage)} regressors, expected 4")
            stages.append(tuple(PrimitiveRegressor.from_dict(r) for r in stage))
        stats = dict(payload.get("stats", {}))
    except ModelSchemaError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelSchemaError(f"invalid model payload: {exc!r}") from exc
    return CascadeModel(stages, hyper, extractor, stats)


def dumps_model(model: CascadeModel) -> str:
    payload = model_to_payload(model)
    body = _canonical_bytes(payload)
    header = {"format": FORMAT_NAME, "format_version": FORMAT_VERSION, "checksum": f"{fnv1a_64(body):016x}"}
    return '{"header":' + json.dumps(header, sort_keys=True, separators=(",", ":")) + ',"payload":' + body.decode() + "}\n"


def loads_model(text: str) -> CascadeModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelChecksumError(f"model file is truncated or corrupted: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("header"), dict) or "payload" not in doc:
        raise ModelSchemaError("model file must hold 'header' and 'payload' objects")
    header = doc["header"]
    if header.get("format") != FORMAT_NAME:
        raise ModelSchemaError(f"not a model file (format={header.get('format')!r})")
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelVersionError(
            f"unsupported model format_version {header.get('format_version')!r}; this build reads {FORMAT_VERSION}"
        )
    payload = doc["payload"]
    if not isinstance(payload, dict):
        raise ModelSchemaError("payload must be an object")
    try:
        actual = f"{fnv1a_64(_canonical_bytes(payload)):016x}"
    except ValueError as exc:
        raise ModelSchemaError(f"payload is not canonical JSON: {exc}") from exc
    if actual != header.get("checksum"):
        raise ModelChecksumError(f"checksum mismatch: header {header.get('checksum')!r}, payload {actual}")
    return model_from_payload(payload)


def save_model(model: CascadeModel, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_model(model))


def load_model(path: str | os.PathLike) -> CascadeModel:
    with open(path) as fh:
        return loads_model(fh.read())


def empty_model(hyper: Hyper = Hyper(T=0), extractor: cnn.ExtractorConfig | None = None) -> CascadeModel:
    return CascadeModel([], hyper, extractor or cnn.seeded_config(hyper.seed))


def with_hyper(model: CascadeModel, **changes) -> CascadeModel:
    return CascadeModel(model.stages, replace(model.hyper, **changes), model.extractor, dict(model.stats))
