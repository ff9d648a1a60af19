"""Run configuration: one flat JSON document driving training and evaluation.

Flat schema keys (all optional in the file; defaults shown by `RunConfig()`):

    data, out, seed, epochs, batch_size, runs, split_ratio,
    lr, beta1, beta2, adam_eps,
    conv_filters, kernel, preset, pool_after_block, dense_widths,
    dropout, output_units, image_size, limit, class_names

CLI flags override file values; the effective config is echoed into every
output directory for provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import ModelConfig


@dataclass(frozen=True)
class RunConfig:
    data_root: str | None = None
    out_dir: str = "mpox-out"
    seed: int = 42
    epochs: int = 20
    batch_size: int = 32
    runs: int = 1
    split_ratio: float = 0.9
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    limit: int | None = None
    class_names: tuple[str, str] | None = None
    model: ModelConfig = field(default_factory=ModelConfig)

    def to_dict(self) -> dict:
        m = self.model
        return {
            "data": self.data_root,
            "out": self.out_dir,
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "runs": self.runs,
            "split_ratio": self.split_ratio,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
            "limit": self.limit,
            "class_names": list(self.class_names) if self.class_names else None,
            "conv_filters": list(m.conv_filters),
            "kernel": m.kernel,
            "preset": m.preset,
            "pool_after_block": (list(m.pool_after_block)
                                 if m.pool_after_block is not None else None),
            "dense_widths": list(m.dense_widths),
            "dropout": m.dropout_rate,
            "output_units": m.output_units,
            "image_size": m.image_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"data", "out", "seed", "epochs", "batch_size", "runs",
                 "split_ratio", "lr", "beta1", "beta2", "adam_eps", "limit",
                 "class_names", "conv_filters", "kernel", "preset",
                 "pool_after_block", "dense_widths", "dropout", "output_units",
                 "image_size"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        model = ModelConfig(
            conv_filters=tuple(d.get("conv_filters", base.model.conv_filters)),
            kernel=int(d.get("kernel", base.model.kernel)),
            preset=d.get("preset", base.model.preset),
            pool_after_block=(tuple(d["pool_after_block"])
                              if d.get("pool_after_block") is not None else None),
            dense_widths=tuple(d.get("dense_widths", base.model.dense_widths)),
            dropout_rate=float(d.get("dropout", base.model.dropout_rate)),
            output_units=int(d.get("output_units", base.model.output_units)),
            image_size=int(d.get("image_size", base.model.image_size)),
        )
        names = d.get("class_names")
        return cls(
            data_root=d.get("data", base.data_root),
            out_dir=d.get("out", base.out_dir),
            seed=int(d.get("seed", base.seed)),
            epochs=int(d.get("epochs", base.epochs)),
            batch_size=int(d.get("batch_size", base.batch_size)),
            runs=int(d.get("runs", base.runs)),
            split_ratio=float(d.get("split_ratio", base.split_ratio)),
            lr=float(d.get("lr", base.lr)),
            beta1=float(d.get("beta1", base.beta1)),
            beta2=float(d.get("beta2", base.beta2)),
            adam_eps=float(d.get("adam_eps", base.adam_eps)),
            limit=(int(d["limit"]) if d.get("limit") is not None else None),
            class_names=tuple(names) if names else None,
            model=model,
        )

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def override(self, **kwargs) -> "RunConfig":
        """Apply non-None overrides; model-level keys go through ModelConfig."""
        model_keys = {"preset", "dropout_rate", "image_size", "conv_filters",
                      "dense_widths", "pool_after_block"}
        model_updates = {}
        run_updates = {}
        for key, value in kwargs.items():
            if value is None:
                continue
            if key in model_keys:
                model_updates[key] = value
            else:
                run_updates[key] = value
        cfg = replace(self, **run_updates) if run_updates else self
        if model_updates:
            if "preset" in model_updates:
                model_updates.setdefault("pool_after_block", None)
            cfg = replace(cfg, model=replace(cfg.model, **model_updates))
        return cfg
