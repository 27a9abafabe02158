"""Online-trainable recurrent forecaster for one (task type, metric) pair.

A single-layer gated recurrent cell (input/forget/output gates plus a
candidate memory path) over a univariate consumption sequence. The encoded
pre-runtime features condition the recurrence twice: they seed the initial
hidden and cell state through affine projections, and they are appended to
every step's input next to the previous (normalized) value, so the learned
dynamics stay conditioned on the task configuration over long rollouts.
"""

from __future__ import annotations

import json
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .domain import FeatureVector, MetricKind, MetricSeries
from .tsfeat import strip_padding

MAGIC = "wfpredict-seqmodel"
FORMAT_VERSION = 1

_GATES = ("i", "f", "o", "c")


class TrainingDivergedError(RuntimeError):
    """An update produced non-finite values; parameters were rolled back."""


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class RunningMinMax:
    """Per-dimension running min/max used to map inputs into [0, 1]."""

    def __init__(self, dim: int):
        self.lo = np.full(dim, np.inf)
        self.hi = np.full(dim, -np.inf)

    def observe(self, x: np.ndarray):
        self.lo = np.minimum(self.lo, x)
        self.hi = np.maximum(self.hi, x)

    def scale(self, x: np.ndarray) -> np.ndarray:
        rng = self.hi - self.lo
        out = np.zeros_like(x, dtype=float)
        seen = np.isfinite(rng) & (rng > 0)
        out[seen] = (x[seen] - self.lo[seen]) / rng[seen]
        return out

    def unscale1(self, y: float) -> float:
        # scalar inverse for the univariate value normalizer
        lo, hi = float(self.lo[0]), float(self.hi[0])
        if not math.isfinite(hi - lo) or hi - lo == 0.0:
            return lo if math.isfinite(lo) else y
        return y * (hi - lo) + lo

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RunningMinMax":
        n = cls(len(d["lo"]))
        n.lo = np.array(d["lo"], dtype=float)
        n.hi = np.array(d["hi"], dtype=float)
        return n


class SequenceModel:
    """Gated recurrent one-step-ahead forecaster, trained incrementally."""

    def __init__(
        self,
        input_dim: int,
        hidden_size: int = 10,
        learning_rate: float = 0.01,
        epochs_per_update: int = 1,
        clip_norm: float = 5.0,
        seed: int = 0,
        metric: Optional[MetricKind] = None,
        tau: int = 1,
    ):
        if hidden_size < 1:
            raise ValueError(f"hidden_size must be >= 1, got {hidden_size}")
        self.input_dim = input_dim  # pre-runtime feature dimension
        self.hidden_size = hidden_size
        self.learning_rate = learning_rate
        self.epochs_per_update = epochs_per_update
        self.clip_norm = clip_norm
        self.seed = seed
        self.metric = metric
        self.tau = tau

        rng = np.random.default_rng(seed)
        H, F = hidden_size, input_dim

        def u(*shape):
            return rng.uniform(-0.08, 0.08, size=shape)

        self.step_input_size = 1 + F  # previous value plus conditioning features
        self.params: Dict[str, np.ndarray] = {}
        for g in _GATES:
            self.params[f"W_{g}"] = u(H, self.step_input_size)
            self.params[f"U_{g}"] = u(H, H)
            self.params[f"b_{g}"] = np.zeros(H)
        self.params["b_f"] = np.ones(hidden_size)  # ease early memory retention
        self.params["W_h0"] = u(H, F)
        self.params["b_h0"] = np.zeros(H)
        self.params["W_c0"] = u(H, F)
        self.params["b_c0"] = np.zeros(H)
        self.params["w_y"] = u(H)
        self.params["b_y"] = np.zeros(1)

        self.value_norm = RunningMinMax(1)
        self.feat_norm = RunningMinMax(input_dim)
        self.len_sum = 0
        self.len_count = 0

    # -- core recurrence ---------------------------------------------------

    def forward_step(
        self, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, float]:
        """One cell step: returns (h, c, scalar prediction in normalized space)."""
        if h_prev.shape != (self.hidden_size,) or c_prev.shape != (self.hidden_size,):
            raise ValueError("state dimension mismatch")
        xv = np.asarray(x, dtype=float)
        if xv.shape != (self.step_input_size,):
            raise ValueError(
                f"step input dimension mismatch: {xv.shape} != ({self.step_input_size},)"
            )
        p = self.params
        i = _sigmoid(p["W_i"] @ xv + p["U_i"] @ h_prev + p["b_i"])
        f = _sigmoid(p["W_f"] @ xv + p["U_f"] @ h_prev + p["b_f"])
        o = _sigmoid(p["W_o"] @ xv + p["U_o"] @ h_prev + p["b_o"])
        g = np.tanh(p["W_c"] @ xv + p["U_c"] @ h_prev + p["b_c"])
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        y = float(p["w_y"] @ h + p["b_y"][0])
        return h, c, y

    def _seed_state(self, fenc: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p = self.params
        h0 = p["W_h0"] @ fenc + p["b_h0"]
        c0 = p["W_c0"] @ fenc + p["b_c0"]
        return h0, c0

    def _encode_features(self, f: FeatureVector) -> np.ndarray:
        x = np.asarray(f.values, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"feature dimension mismatch: {x.shape[0]} != {self.input_dim}")
        return self.feat_norm.scale(x)

    # -- training ----------------------------------------------------------

    def _forward_seq(self, fenc: np.ndarray, inputs: np.ndarray, targets: np.ndarray):
        """Teacher-forced pass over one sequence; returns loss and caches."""
        p = self.params
        T = len(inputs)
        h, c = self._seed_state(fenc)
        cache = []
        ys = np.empty(T)
        for t in range(T):
            xv = np.concatenate([[inputs[t]], fenc])
            h_prev, c_prev = h, c
            ai = p["W_i"] @ xv + p["U_i"] @ h_prev + p["b_i"]
            af = p["W_f"] @ xv + p["U_f"] @ h_prev + p["b_f"]
            ao = p["W_o"] @ xv + p["U_o"] @ h_prev + p["b_o"]
            ac = p["W_c"] @ xv + p["U_c"] @ h_prev + p["b_c"]
            i, f, o, g = _sigmoid(ai), _sigmoid(af), _sigmoid(ao), np.tanh(ac)
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            ys[t] = p["w_y"] @ h + p["b_y"][0]
            cache.append((xv, h_prev, c_prev, i, f, o, g, c, tc, h))
        loss = float(np.mean((ys - targets) ** 2))
        return loss, ys, cache

    def _gradients(self, fenc: np.ndarray, inputs: np.ndarray, targets: np.ndarray):
        """Full-sequence backpropagation through time. Returns (loss, grads)."""
        p = self.params
        loss, ys, cache = self._forward_seq(fenc, inputs, targets)
        T = len(inputs)
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        dh_next = np.zeros(self.hidden_size)
        dc_next = np.zeros(self.hidden_size)
        for t in range(T - 1, -1, -1):
            xv, h_prev, c_prev, i, f, o, g, c, tc, h = cache[t]
            dy = 2.0 * (ys[t] - targets[t]) / T
            grads["w_y"] += dy * h
            grads["b_y"][0] += dy
            dh = dy * p["w_y"] + dh_next
            do = dh * tc
            dc = dh * o * (1 - tc * tc) + dc_next
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dai = di * i * (1 - i)
            daf = df * f * (1 - f)
            dao = do * o * (1 - o)
            dac = dg * (1 - g * g)
            for name, da in (("i", dai), ("f", daf), ("o", dao), ("c", dac)):
                grads[f"W_{name}"] += np.outer(da, xv)
                grads[f"U_{name}"] += np.outer(da, h_prev)
                grads[f"b_{name}"] += da
            dh_next = (
                p["U_i"].T @ dai + p["U_f"].T @ daf + p["U_o"].T @ dao + p["U_c"].T @ dac
            )
            dc_next = dc * f
        # initial state came from the feature projection
        grads["W_h0"] += np.outer(dh_next, fenc)
        grads["b_h0"] += dh_next
        grads["W_c0"] += np.outer(dc_next, fenc)
        grads["b_c0"] += dc_next
        return loss, grads

    @staticmethod
    def _training_io(norm_values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        # one-step-ahead: a zero start token, then each observed value
        inputs = np.concatenate([[0.0], norm_values[:-1]])
        return inputs, norm_values

    def update(self, f: FeatureVector, observed: MetricSeries) -> float:
        """Train on one example (batch size 1) and return the final MSE.

        Runs epochs_per_update gradient passes; the running normalizers are
        refreshed from the example before training. Any non-finite result
        rolls parameters back and raises TrainingDivergedError.
        """
        raw = np.asarray(observed.values, dtype=float)
        fx = np.asarray(f.values, dtype=float)
        for v in raw:
            self.value_norm.observe(np.array([v]))
        self.feat_norm.observe(fx)
        self.len_sum += len(raw)
        self.len_count += 1

        fenc = self._encode_features(f)
        lo, hi = self.value_norm.lo[0], self.value_norm.hi[0]
        rng = hi - lo
        vnorm = (raw - lo) / rng if rng > 0 else np.zeros_like(raw)
        inputs, targets = self._training_io(vnorm)

        backup = {k: v.copy() for k, v in self.params.items()}
        try:
            for _ in range(self.epochs_per_update):
                loss, grads = self._gradients(fenc, inputs, targets)
                if not math.isfinite(loss):
                    raise TrainingDivergedError(f"non-finite loss {loss}")
                total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                scale = self.clip_norm / total if total > self.clip_norm else 1.0
                for k in self.params:
                    self.params[k] -= self.learning_rate * scale * grads[k]
            final_loss, _, _ = self._forward_seq(fenc, inputs, targets)
            if not math.isfinite(final_loss) or not all(
                np.all(np.isfinite(v)) for v in self.params.values()
            ):
                raise TrainingDivergedError("non-finite parameters after update")
        except TrainingDivergedError:
            self.params = backup
            raise
        except FloatingPointError:
            self.params = backup
            raise TrainingDivergedError("floating point failure during update")
        return final_loss

    # -- inference ---------------------------------------------------------

    def default_horizon(self) -> int:
        """Running mean observed length, rounded up; 1 before any update."""
        if self.len_count == 0:
            return 1
        return max(1, math.ceil(self.len_sum / self.len_count))

    def forecast(self, f: FeatureVector, n: Optional[int] = None) -> MetricSeries:
        """Autoregressive n-step forecast, denormalized and padding-stripped."""
        if n is None:
            n = self.default_horizon()
        if n < 1:
            raise ValueError(f"forecast horizon must be >= 1, got {n}")
        fenc = self._encode_features(f)
        h, c = self._seed_state(fenc)
        x = 0.0
        preds = []
        for _ in range(n):
            h, c, y = self.forward_step(np.concatenate([[x], fenc]), h, c)
            preds.append(self.value_norm.unscale1(y))
            x = y
        stripped = strip_padding(preds)
        if not stripped:
            stripped = [preds[0]]
        metric = self.metric if self.metric is not None else MetricKind.utime
        return MetricSeries(metric=metric, interval_seconds=self.tau, values=tuple(stripped))

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "magic": MAGIC,
            "version": FORMAT_VERSION,
            "input_dim": self.input_dim,
            "hidden_size": self.hidden_size,
            "learning_rate": self.learning_rate,
            "epochs_per_update": self.epochs_per_update,
            "clip_norm": self.clip_norm,
            "seed": self.seed,
            "metric": self.metric.value if self.metric else None,
            "tau": self.tau,
            "len_sum": self.len_sum,
            "len_count": self.len_count,
            "value_norm": self.value_norm.to_dict(),
            "feat_norm": self.feat_norm.to_dict(),
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceModel":
        if d.get("magic") != MAGIC:
            raise ValueError(f"not a sequence model container: {d.get('magic')!r}")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported sequence model version {d.get('version')}")
        m = cls(
            input_dim=d["input_dim"],
            hidden_size=d["hidden_size"],
            learning_rate=d["learning_rate"],
            epochs_per_update=d["epochs_per_update"],
            clip_norm=d["clip_norm"],
            seed=d["seed"],
            metric=MetricKind(d["metric"]) if d["metric"] else None,
            tau=d["tau"],
        )
        m.len_sum = d["len_sum"]
        m.len_count = d["len_count"]
        m.value_norm = RunningMinMax.from_dict(d["value_norm"])
        m.feat_norm = RunningMinMax.from_dict(d["feat_norm"])
        m.params = {k: np.array(v, dtype=float) for k, v in d["params"].items()}
        return m

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, s: str) -> "SequenceModel":
        return cls.from_dict(json.loads(s))
