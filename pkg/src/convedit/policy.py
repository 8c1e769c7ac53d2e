"""Dialogue policies: the deterministic rule cascade and a numpy DQN.

The Q-network is a single hidden layer MLP trained with exact analytic
gradients and Adam; tests cross-check every gradient against central finite
differences. Checkpoints use a documented little-endian binary layout and
refuse to load against a different ontology or feature-vector layout.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .engine import EngineState
from .ontology import (
    CONFIRM,
    EXECUTE,
    QUERY,
    REQUEST,
    SLOT_INTENT,
    SLOT_OBJECT,
    SLOT_OBJECT_MASK,
    Ontology,
    SystemAction,
)
from .tracker import BeliefState

VECTOR_LAYOUT_VERSION = 1
DEFAULT_TAU = 0.8


# -- rule-based policy -------------------------------------------------------


def rule_action(
    belief: BeliefState, engine: EngineState, ontology: Ontology, tau: float = DEFAULT_TAU
) -> SystemAction:
    """Handcrafted cascade over the belief state.

    1. No confident intent hypothesis: (re-)request the intent.
    2. Fill the believed intent's arguments in ontology order. The region
       argument resolves through the vision flow: request the object name,
       query the vision engine once per object hypothesis, and request the
       mask directly when the query result was empty or got rejected.
    3. Confirm any argument whose confidence sits below tau, one per turn.
    4. Execute the believed intent.
    """
    intent, intent_conf = belief.best_intent()
    if intent is None or intent_conf < tau:
        return SystemAction(REQUEST, SLOT_INTENT)
    args = ontology.dependent_slots(intent)
    for slot in args:
        if belief.stored.get(slot) is not None:
            continue
        if slot == SLOT_OBJECT_MASK:
            obj = belief.stored.get(SLOT_OBJECT)
            if obj is None:
                return SystemAction(REQUEST, SLOT_OBJECT)
            if belief.last_query_object != obj:
                return SystemAction(QUERY)
            return SystemAction(REQUEST, SLOT_OBJECT_MASK)
        return SystemAction(REQUEST, slot)
    for slot in args:
        if belief.confidence.get(slot, 0.0) < tau:
            return SystemAction(CONFIRM, slot)
    return SystemAction(EXECUTE, intent)


# -- Q-network ---------------------------------------------------------------


@dataclass
class QNetworkParams:
    """Weights of the two-layer MLP: Q = relu(x W1' + b1) W2' + b2."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, input_dim: int, hidden: int, output_dim: int, rng: np.random.Generator):
        """He-style normal initialization, biases at zero."""
        return cls(
            W1=rng.normal(0.0, np.sqrt(2.0 / input_dim), size=(hidden, input_dim)),
            b1=np.zeros(hidden),
            W2=rng.normal(0.0, np.sqrt(2.0 / hidden), size=(output_dim, hidden)),
            b2=np.zeros(output_dim),
        )

    def copy(self) -> "QNetworkParams":
        return QNetworkParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


def q_forward(params: QNetworkParams, x: np.ndarray) -> np.ndarray:
    """Q-values for a batch (or single vector) of belief features."""
    single = x.ndim == 1
    X = np.atleast_2d(x)
    H = np.maximum(X @ params.W1.T + params.b1, 0.0)
    Q = H @ params.W2.T + params.b2
    return Q[0] if single else Q


def td_targets(
    rewards: np.ndarray, next_q: np.ndarray, terminal: np.ndarray, gamma: float
) -> np.ndarray:
    """One-step targets: r + gamma * max_a Q_target(s') on non-terminal steps."""
    return rewards + (1.0 - terminal) * gamma * next_q.max(axis=1)


def q_loss_and_grads(params: QNetworkParams, X: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean squared TD error over the batch and its exact gradients."""
    B = X.shape[0]
    pre = X @ params.W1.T + params.b1
    H = np.maximum(pre, 0.0)
    Q = H @ params.W2.T + params.b2
    idx = np.arange(B)
    diff = Q[idx, actions] - targets
    loss = float(np.mean(diff**2))
    dQ = np.zeros_like(Q)
    dQ[idx, actions] = 2.0 * diff / B
    dW2 = dQ.T @ H
    db2 = dQ.sum(axis=0)
    dH = dQ @ params.W2
    dpre = dH * (pre > 0.0)
    dW1 = dpre.T @ X
    db1 = dpre.sum(axis=0)
    return loss, {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


@dataclass
class AdamState:
    """First/second moment accumulators for each parameter tensor."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: QNetworkParams) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.arrays().items()},
            v={k: np.zeros_like(a) for k, a in params.arrays().items()},
        )


def adam_update(
    params: QNetworkParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    state.t += 1
    arrays = params.arrays()
    for k, g in grads.items():
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        m_hat = state.m[k] / (1.0 - beta1**state.t)
        v_hat = state.v[k] / (1.0 - beta2**state.t)
        arrays[k] -= lr * m_hat / (np.sqrt(v_hat) + eps)


class ReplayBuffer:
    """Fixed-capacity FIFO transition store with uniform sampling."""

    def __init__(self, capacity: int = 2000):
        self.capacity = capacity
        self._data: list[tuple] = []

    def __len__(self) -> int:
        return len(self._data)

    def push(self, state, action: int, reward: float, next_state, terminal: bool) -> None:
        if len(self._data) >= self.capacity:
            self._data.pop(0)
        self._data.append((state, int(action), float(reward), next_state, bool(terminal)))

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.choice(len(self._data), size=batch_size, replace=False)
        batch = [self._data[i] for i in idx]
        states = np.stack([b[0] for b in batch])
        actions = np.array([b[1] for b in batch], dtype=np.int64)
        rewards = np.array([b[2] for b in batch], dtype=np.float64)
        next_states = np.stack([b[3] for b in batch])
        terminal = np.array([b[4] for b in batch], dtype=np.float64)
        return states, actions, rewards, next_states, terminal


def select_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties break toward the lowest action index."""
    if rng.random() < epsilon:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


@dataclass
class DQNPolicy:
    """Online network, frozen target, replay buffer, and optimizer state."""

    params: QNetworkParams
    target: QNetworkParams
    buffer: ReplayBuffer
    adam: AdamState
    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 32
    sync_every: int = 100
    train_steps: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def fresh(
        cls,
        input_dim: int,
        n_actions: int,
        hidden: int = 40,
        seed: int = 0,
        gamma: float = 0.99,
        lr: float = 1e-3,
        batch_size: int = 32,
        buffer_capacity: int = 2000,
        sync_every: int = 100,
    ) -> "DQNPolicy":
        rng = np.random.default_rng(seed)
        params = QNetworkParams.init(input_dim, hidden, n_actions, rng)
        return cls(
            params=params,
            target=params.copy(),
            buffer=ReplayBuffer(buffer_capacity),
            adam=AdamState.init(params),
            gamma=gamma,
            lr=lr,
            batch_size=batch_size,
            sync_every=sync_every,
            meta={"seed": seed, "hidden": hidden},
        )

    def act(self, vector: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        return select_action(q_forward(self.params, vector), epsilon, rng)

    def train_step(self, rng: np.random.Generator) -> float | None:
        """One uniform batch and one Adam update; no-op while underfull.

        Returns the batch loss, or None when the buffer holds fewer than
        batch_size transitions. The target network is refreshed every
        sync_every completed steps; sync_every=0 disables the automatic
        refresh so a caller can drive the cadence externally.
        """
        if len(self.buffer) < self.batch_size:
            return None
        X, actions, rewards, X2, terminal = self.buffer.sample(self.batch_size, rng)
        next_q = q_forward(self.target, X2)
        y = td_targets(rewards, next_q, terminal, self.gamma)
        loss, grads = q_loss_and_grads(self.params, X, actions, y)
        adam_update(self.params, grads, self.adam, lr=self.lr)
        self.train_steps += 1
        if self.sync_every > 0 and self.train_steps % self.sync_every == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.target = self.params.copy()


# -- checkpoints -------------------------------------------------------------

CHECKPOINT_MAGIC = b"CEQ1"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str, policy: DQNPolicy, ontology: Ontology, train_ser: float, seed: int) -> None:
    """Write the policy to a little-endian binary file.

    Layout: magic "CEQ1", u32 format version, u32 vector layout version,
    32-byte ontology content hash, u64 seed, f64 training SER, u64 adam t,
    u64 train steps, u32 array count, then per array: u16 name length,
    utf-8 name, u8 ndim, u32 dims, raw float64 data in row-major order.
    """
    arrays: dict[str, np.ndarray] = {}
    for prefix, p in (("q", policy.params), ("t", policy.target)):
        for k, a in p.arrays().items():
            arrays[f"{prefix}.{k}"] = a
    for k, a in policy.adam.m.items():
        arrays[f"m.{k}"] = a
    for k, a in policy.adam.v.items():
        arrays[f"v.{k}"] = a
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, VECTOR_LAYOUT_VERSION))
        f.write(bytes.fromhex(ontology.content_hash())[:32])
        f.write(struct.pack("<Qd", seed, float(train_ser)))
        f.write(struct.pack("<QQ", policy.adam.t, policy.train_steps))
        f.write(struct.pack("<I", len(arrays)))
        for name, a in arrays.items():
            data = np.ascontiguousarray(a, dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            f.write(data.tobytes())


def load_checkpoint(path: str, ontology: Ontology) -> DQNPolicy:
    """Load a checkpoint, rejecting ontology or layout mismatches."""
    with open(path, "rb") as f:
        blob = f.read()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        chunk = blob[off : off + n]
        if len(chunk) != n:
            raise CheckpointError("truncated checkpoint")
        off += n
        return chunk

    if take(4) != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic")
    version, layout = struct.unpack("<II", take(8))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if layout != VECTOR_LAYOUT_VERSION:
        raise CheckpointError(f"vector layout {layout} does not match {VECTOR_LAYOUT_VERSION}")
    stored_hash = take(32)
    if stored_hash != bytes.fromhex(ontology.content_hash())[:32]:
        raise CheckpointError("checkpoint was trained against a different ontology")
    seed, train_ser = struct.unpack("<Qd", take(16))
    adam_t, train_steps = struct.unpack("<QQ", take(16))
    (n_arrays,) = struct.unpack("<I", take(4))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_arrays):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim))
        count = int(np.prod(dims)) if dims else 1
        data = np.frombuffer(take(8 * count), dtype="<f8").reshape(dims).copy()
        arrays[name] = data
    try:
        params = QNetworkParams(arrays["q.W1"], arrays["q.b1"], arrays["q.W2"], arrays["q.b2"])
        target = QNetworkParams(arrays["t.W1"], arrays["t.b1"], arrays["t.W2"], arrays["t.b2"])
        adam = AdamState(
            m={k: arrays[f"m.{k}"] for k in ("W1", "b1", "W2", "b2")},
            v={k: arrays[f"v.{k}"] for k in ("W1", "b1", "W2", "b2")},
            t=adam_t,
        )
    except KeyError as e:
        raise CheckpointError(f"missing array {e}") from e
    policy = DQNPolicy(
        params=params,
        target=target,
        buffer=ReplayBuffer(),
        adam=adam,
        train_steps=train_steps,
        meta={"seed": seed, "train_ser": train_ser},
    )
    return policy
