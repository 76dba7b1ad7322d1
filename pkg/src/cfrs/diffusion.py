"""Conditional denoising policy over power allocations.

A small tanh MLP learns to predict the noise injected by a forward
variance schedule on expert allocation vectors, conditioned on the
propagation environment (Rician factor and angular spread). Once trained,
running the reverse chain from Gaussian noise emits an allocation for an
unseen environment in milliseconds, amortizing the genetic search that
produced the experts. Everything is plain float64 numpy with hand-derived
gradients.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .closed_form import PowerAllocation

KAPPA_RANGE_DB = (-10.0, 20.0)
ASD_RANGE_DEG = (5.0, 90.0)
T_EMBED = 16

CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class Environment:
    kappa_db: float
    asd_deg: float

    def in_training_range(self):
        return (KAPPA_RANGE_DB[0] <= self.kappa_db <= KAPPA_RANGE_DB[1]
                and ASD_RANGE_DEG[0] <= self.asd_deg <= ASD_RANGE_DEG[1])

    def features(self):
        """Conditioning features: Rician factor mapped to [-1, 1], angular
        spread mapped to [0, 1] over the training ranges."""
        k_lo, k_hi = KAPPA_RANGE_DB
        a_lo, a_hi = ASD_RANGE_DEG
        return np.array([
            2.0 * (self.kappa_db - k_lo) / (k_hi - k_lo) - 1.0,
            (self.asd_deg - a_lo) / (a_hi - a_lo),
        ])


# ---------------------------------------------------------------------------
# Variance schedule and the forward/reverse processes.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    v: np.ndarray          # (T,) injected variance per step
    alpha: np.ndarray      # (T,) 1 - v
    alpha_bar: np.ndarray  # (T,) cumulative signal retention

    @property
    def T(self):
        return len(self.v)


def make_schedule(T=10, v_min=0.02, v_max=0.2) -> Schedule:
    """Linear variance schedule v_t from v_min to v_max over T steps.

    The default floor of 0.02 keeps the terminal alpha_bar near 0.3 while
    leaving the last denoising step wide enough that the sampler's own
    injected noise stays inside the region the network was trained on.
    A much smaller floor makes the final step a near-singular inversion
    (gain 1/sqrt(1 - alpha_bar_1)) that a smooth network cannot track.
    """
    if T < 1:
        raise ValueError("T must be a positive integer")
    v = np.linspace(v_min, v_max, T)
    if np.any(v <= 0.0) or np.any(v >= 1.0):
        raise ValueError("schedule variances must lie in (0, 1)")
    alpha = 1.0 - v
    return Schedule(v=v, alpha=alpha, alpha_bar=np.cumprod(alpha))


def forward_diffuse(x0, t, eps, schedule: Schedule):
    """Noised sample x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.

    t is 1-based and may be an integer or an array matching x0's batch axis.
    """
    ab = schedule.alpha_bar[np.asarray(t) - 1]
    ab = np.reshape(ab, np.shape(ab) + (1,) * (np.ndim(x0) - np.ndim(ab)))
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def reverse_sample(model, schedule: Schedule, env: Environment, dim, rng,
                   clip_bounds=(0.0, 1.0)):
    """Run the reverse chain from Gaussian noise down to an allocation vector.

    model(x, t, env_features) predicts the injected noise for a batch x of
    shape (B, dim) with integer steps t of shape (B,). Fresh noise is added
    at every step except the last, and the result is clamped to the box.
    """
    feats = env.features()[None, :]
    x = rng.standard_normal((1, dim))
    for t in range(schedule.T, 0, -1):
        vt = schedule.v[t - 1]
        at = schedule.alpha[t - 1]
        abt = schedule.alpha_bar[t - 1]
        eps = model(x, np.array([t]), feats)
        x = x / np.sqrt(at) - vt / np.sqrt(at * (1.0 - abt)) * eps
        if t > 1:
            x = x + np.sqrt(vt) * rng.standard_normal(x.shape)
    if clip_bounds is not None:
        x = np.clip(x, clip_bounds[0], clip_bounds[1])
    return x[0]


def split_allocation(vec, K, L) -> PowerAllocation:
    """Interpret a sampled vector as (rho, eta) for K users and L APs."""
    return PowerAllocation.from_vector(np.asarray(vec, dtype=float), K, L)


# ---------------------------------------------------------------------------
# Noise-prediction network: two tanh hidden layers, manual backprop.
# ---------------------------------------------------------------------------

def _time_embedding(t):
    """Sinusoidal features of the (1-based) step index, shape (B, T_EMBED)."""
    half = T_EMBED // 2
    freqs = 10000.0 ** (-np.arange(half) / half)
    ang = np.asarray(t, dtype=float)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


class EpsNetwork:
    """MLP eps_theta(x_t, t, env) with parameters exposed for plain numpy
    training. Input is the noised vector, a sinusoidal step embedding, and
    the two environment features."""

    def __init__(self, dim, hidden=128, params=None, rng=None):
        self.dim = dim
        self.hidden = hidden
        self.in_dim = dim + T_EMBED + 2
        if params is not None:
            self.params = params
        else:
            if rng is None:
                raise ValueError("need either params or an rng to initialize")
            def glorot(n_out, n_in):
                return rng.normal(0.0, np.sqrt(2.0 / (n_in + n_out)), (n_out, n_in))
            self.params = {
                "W1": glorot(hidden, self.in_dim), "b1": np.zeros(hidden),
                "W2": glorot(hidden, hidden), "b2": np.zeros(hidden),
                "W3": glorot(dim, hidden), "b3": np.zeros(dim),
            }

    def _assemble(self, x, t, env):
        x = np.asarray(x, dtype=float)
        env = np.broadcast_to(np.asarray(env, dtype=float), (x.shape[0], 2))
        return np.concatenate([x, _time_embedding(t), env], axis=1)

    def _forward(self, inp):
        p = self.params
        z1 = inp @ p["W1"].T + p["b1"]
        a1 = np.tanh(z1)
        z2 = a1 @ p["W2"].T + p["b2"]
        a2 = np.tanh(z2)
        out = a2 @ p["W3"].T + p["b3"]
        return out, (inp, a1, a2)

    def __call__(self, x, t, env):
        out, _ = self._forward(self._assemble(x, t, env))
        return out

    def loss_and_grads(self, x, t, env, target):
        """Mean squared noise-prediction error over the batch and its exact
        gradient for every parameter."""
        p = self.params
        out, (inp, a1, a2) = self._forward(self._assemble(x, t, env))
        diff = out - target
        B = x.shape[0]
        loss = float((diff ** 2).sum() / B)
        dout = 2.0 * diff / B
        grads = {"W3": dout.T @ a2, "b3": dout.sum(axis=0)}
        da2 = dout @ p["W3"]
        dz2 = da2 * (1.0 - a2 ** 2)
        grads["W2"] = dz2.T @ a1
        grads["b2"] = dz2.sum(axis=0)
        da1 = dz2 @ p["W2"]
        dz1 = da1 * (1.0 - a1 ** 2)
        grads["W1"] = dz1.T @ inp
        grads["b1"] = dz1.sum(axis=0)
        return loss, grads


class Adam:
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g ** 2
            params[k] -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c)
                                                        + self.eps)


# ---------------------------------------------------------------------------
# Expert dataset and training loop.
# ---------------------------------------------------------------------------

@dataclass
class ExpertDataset:
    kappa_db: np.ndarray  # (M,)
    asd_deg: np.ndarray   # (M,)
    x0: np.ndarray        # (M, D) allocation vectors inside [0, 1]
    sum_se: np.ndarray    # (M,) closed-form value of each expert

    def __post_init__(self):
        if np.any(self.x0 < 0.0) or np.any(self.x0 > 1.0):
            raise ValueError("expert vectors must lie in [0, 1]")

    def __len__(self):
        return len(self.sum_se)

    @property
    def dim(self):
        return self.x0.shape[1]

    def features(self):
        envs = [Environment(k, a) for k, a in zip(self.kappa_db, self.asd_deg)]
        return np.stack([e.features() for e in envs])

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["env_kappa_db", "env_asd_deg"]
                            + [f"x0_{i}" for i in range(self.dim)] + ["sum_se"])
            for m in range(len(self)):
                writer.writerow([repr(float(self.kappa_db[m])),
                                 repr(float(self.asd_deg[m]))]
                                + [repr(float(v)) for v in self.x0[m]]
                                + [repr(float(self.sum_se[m]))])

    @classmethod
    def load_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        if (len(header) < 4 or header[0] != "env_kappa_db"
                or header[-1] != "sum_se"):
            raise ValueError(f"{path}: not an expert dataset file")
        dim = len(header) - 3
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        return cls(kappa_db=data[:, 0], asd_deg=data[:, 1],
                   x0=data[:, 2:2 + dim], sum_se=data[:, -1])


def build_expert_dataset(scenario, envs, ga_cfg, rng, cross_screen=True) -> ExpertDataset:
    """Run the genetic expert on a fixed network drop for each environment.

    Each grid point first gets its own warm-started GA run. With cross_screen
    on, every environment is then re-scored against the whole pool of winners
    and keeps the best vector for its own statistics. Near-optimal
    allocations transfer well between neighbouring environments, so the
    screen raises the stored values and, just as important for a conditional
    model, removes the run-to-run GA scatter that would otherwise make the
    env -> x0 map jump between unrelated near-optima.
    """
    from .closed_form import sum_se_batch

    envs = list(envs)
    K, L = scenario.dims
    caches, vecs, values = [], [], []
    for env in envs:
        cache = scenario.cache(env)
        alloc, value = scenario.expert(env, ga_cfg, rng, cache=cache)
        caches.append(cache)
        vecs.append(alloc.to_vector())
        values.append(value)
    vecs = np.stack(vecs)
    values = np.array(values, dtype=float)
    if cross_screen and len(envs) > 1:
        for _ in range(4):
            changed = 0
            for m, cache in enumerate(caches):
                pool = sum_se_batch(cache, vecs[:, :L],
                                    vecs[:, L:].reshape(len(envs), K, L))
                j = int(np.argmax(pool))
                if pool[j] > values[m] + 1e-12:
                    vecs[m] = vecs[j].copy()
                    values[m] = float(pool[j])
                    changed += 1
            if not changed:
                break
    return ExpertDataset(kappa_db=np.array([e.kappa_db for e in envs], dtype=float),
                         asd_deg=np.array([e.asd_deg for e in envs], dtype=float),
                         x0=vecs, sum_se=values)


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 20000
    batch_size: int = 64
    lr: float = 1e-4
    explore_noise: float = 0.01  # jitter on the expert targets, clamped to the box


class DiffusionTrainer:
    """Plain SGD loop: sample records, steps, and noise; regress the noise."""

    def __init__(self, net: EpsNetwork, schedule: Schedule,
                 dataset: ExpertDataset, cfg: TrainConfig, rng):
        self.net = net
        self.schedule = schedule
        self.cfg = cfg
        self.rng = rng
        self.x0 = dataset.x0
        self.feats = dataset.features()
        self.opt = Adam(net.params, lr=cfg.lr)
        self.loss_history = []

    def step(self):
        rng, cfg = self.rng, self.cfg
        idx = rng.integers(0, len(self.x0), size=cfg.batch_size)
        t = rng.integers(1, self.schedule.T + 1, size=cfg.batch_size)
        eps = rng.standard_normal((cfg.batch_size, self.x0.shape[1]))
        x0 = self.x0[idx]
        if cfg.explore_noise > 0.0:
            x0 = np.clip(x0 + cfg.explore_noise
                         * rng.standard_normal(x0.shape), 0.0, 1.0)
        x_t = forward_diffuse(x0, t, eps, self.schedule)
        loss, grads = self.net.loss_and_grads(x_t, t, self.feats[idx], eps)
        if not np.isfinite(loss):
            raise TrainingError(f"loss diverged at step {len(self.loss_history)}")
        self.opt.step(self.net.params, grads)
        self.loss_history.append(loss)
        return loss

    def run(self, n_steps):
        for _ in range(n_steps):
            self.step()
        return np.asarray(self.loss_history)


def train(dataset: ExpertDataset, schedule: Schedule, cfg: TrainConfig, rng,
          net: EpsNetwork = None):
    """Train a noise-prediction network on an expert dataset.

    Returns (net, loss_history)."""
    if net is None:
        net = EpsNetwork(dataset.dim, rng=rng)
    trainer = DiffusionTrainer(net, schedule, dataset, cfg, rng)
    history = trainer.run(cfg.steps)
    return net, history


# ---------------------------------------------------------------------------
# Checkpoints.
# ---------------------------------------------------------------------------

def save_checkpoint(path, net: EpsNetwork, schedule: Schedule):
    meta = {
        "version": CHECKPOINT_VERSION,
        "dim": net.dim,
        "hidden": net.hidden,
        "t_embed": T_EMBED,
        "kappa_range_db": list(KAPPA_RANGE_DB),
        "asd_range_deg": list(ASD_RANGE_DEG),
    }
    np.savez(path, meta=json.dumps(meta), v=schedule.v, **net.params)


def load_checkpoint(path):
    """Load (net, schedule); raises ValueError on version or shape mismatch."""
    with np.load(path, allow_pickle=False) as data:
        try:
            meta = json.loads(str(data["meta"]))
        except KeyError as exc:
            raise ValueError(f"{path}: not a policy checkpoint") from exc
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version "
                             f"{meta.get('version')!r}")
        if meta.get("t_embed") != T_EMBED:
            raise ValueError(f"{path}: incompatible step-embedding width")
        params = {k: data[k] for k in ("W1", "b1", "W2", "b2", "W3", "b3")}
        dim, hidden = meta["dim"], meta["hidden"]
        if params["W1"].shape != (hidden, dim + T_EMBED + 2) \
                or params["W3"].shape != (dim, hidden):
            raise ValueError(f"{path}: weight shapes do not match the header")
        v = data["v"]
    alpha = 1.0 - v
    schedule = Schedule(v=v, alpha=alpha, alpha_bar=np.cumprod(alpha))
    return EpsNetwork(dim, hidden=hidden, params=params), schedule
