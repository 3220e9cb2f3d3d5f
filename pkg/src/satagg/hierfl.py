"""Hierarchical federated averaging on synthetic linear-regression tasks.

Model vectors are plain numpy arrays. Each device holds a least-squares task
with loss 0.5*||A x - b||^2 (sum over its samples) and runs E steps of
mini-batch SGD per round; the network aggregates the weighted model deltas
(bottom-up along a routing tree, or flat) and applies them to the global
model:  x <- x + sum_i lambda_i * delta_i.

Tree aggregation is exactly linear in the deltas, so any tree shape yields
the flat weighted sum up to floating-point association; that equivalence is
what decouples routing-energy optimisation from learning accuracy.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np


class AggregationError(ValueError):
    """A device's serving terminal is missing from the aggregation tree."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, round_index, loss):
        self.round_index = round_index
        self.loss = loss
        super().__init__(f"training diverged at round {round_index} (loss={loss!r})")


@dataclass(frozen=True)
class LocalTask:
    """One device's regression task and SGD hyper-parameters."""

    device_id: int
    features: np.ndarray        # (samples, dim)
    targets: np.ndarray         # (samples,)
    weight: float               # aggregation weight lambda
    local_steps: int = 5
    learning_rate: float = 1e-3
    batch_size: int = 32

    def __post_init__(self):
        if self.local_steps < 1:
            raise ValueError("local_steps must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.weight < 0:
            raise ValueError("weight must be >= 0")

    def loss(self, x: np.ndarray) -> float:
        r = self.features @ x - self.targets
        return 0.5 * float(r @ r)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.features.T @ (self.features @ x - self.targets)


def local_update(task: LocalTask, global_model: np.ndarray,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """E steps of mini-batch SGD from the global model; returns the delta
    x_final - x_initial. Batches are sampled without replacement and scaled
    by n/|batch| so the stochastic gradient stays unbiased; when batch_size
    covers the dataset the update is deterministic full-batch."""
    n = task.features.shape[0]
    full_batch = task.batch_size >= n
    if not full_batch and rng is None:
        raise ValueError("mini-batch updates need an rng")
    x = np.array(global_model, dtype=float)
    for _ in range(task.local_steps):
        if full_batch:
            g = task.gradient(x)
        else:
            idx = rng.choice(n, size=task.batch_size, replace=False)
            a, b = task.features[idx], task.targets[idx]
            g = (n / task.batch_size) * (a.T @ (a @ x - b))
        x -= task.learning_rate * g
    return x - np.asarray(global_model, dtype=float)


def tree_aggregate(tree, deltas: dict, weights: dict, device_terminals: dict) -> np.ndarray:
    """Weighted-sum reduction of device deltas along an aggregation tree.

    Partial sums flow child -> parent; the root ends up holding
    sum_i weight_i * delta_i. Devices and children are accumulated in
    ascending id order so the result is reproducible bit-for-bit.
    """
    nodes = tree.nodes()
    missing = sorted(t for t in set(device_terminals.values()) if t not in nodes)
    if missing:
        raise AggregationError(f"terminals not covered by the tree: {missing}")

    payload = {}
    for dev in sorted(deltas):
        node = device_terminals[dev]
        term = weights[dev] * np.asarray(deltas[dev], dtype=float)
        payload[node] = payload.get(node, 0.0) + term

    children = {}
    out_edge = {}
    for c, p in tree.edges:
        children.setdefault(p, []).append(c)
        out_edge[c] = p
    depth = {}
    for v in nodes:
        d = 0
        w = v
        while w != tree.root:
            w = out_edge[w]
            d += 1
        depth[v] = d

    partial = {}
    for v in sorted(nodes, key=lambda v: (-depth[v], v)):
        acc = payload.get(v, 0.0)
        for c in sorted(children.get(v, ())):
            acc = acc + partial[c]
        partial[v] = acc
    return np.asarray(partial[tree.root], dtype=float)


def flat_aggregate(deltas: dict, weights: dict) -> np.ndarray:
    """Reference reduction: sum of weight_i * delta_i in ascending device id."""
    acc = 0.0
    for dev in sorted(deltas):
        acc = acc + weights[dev] * np.asarray(deltas[dev], dtype=float)
    return np.asarray(acc, dtype=float)


def global_loss(tasks, x: np.ndarray) -> float:
    return float(sum(t.weight * t.loss(x) for t in tasks))


def global_gradient(tasks, x: np.ndarray) -> np.ndarray:
    g = np.zeros_like(np.asarray(x, dtype=float))
    for t in tasks:
        g += t.weight * t.gradient(x)
    return g


def run_training(tasks, rounds: int, rng: np.random.Generator,
                 x0: np.ndarray | None = None, divergence_limit: float = 1e12):
    """Federated rounds with flat aggregation; returns per-round records
    [(round, global_loss, grad_norm)], loss/grad evaluated on the updated
    model. Raises TrainingDivergedError if the loss blows up."""
    dim = tasks[0].features.shape[1]
    x = np.zeros(dim) if x0 is None else np.array(x0, dtype=float)
    initial = global_loss(tasks, x)
    trace = []
    for t in range(rounds):
        deltas = {}
        for task in sorted(tasks, key=lambda task: task.device_id):
            deltas[task.device_id] = local_update(task, x, rng)
        weights = {task.device_id: task.weight for task in tasks}
        x = x + flat_aggregate(deltas, weights)
        loss = global_loss(tasks, x)
        if not math.isfinite(loss) or loss > divergence_limit * max(initial, 1.0):
            raise TrainingDivergedError(t, loss)
        trace.append((t, loss, float(np.linalg.norm(global_gradient(tasks, x)))))
    return trace


def centralized_gd(tasks, rounds: int, learning_rate: float,
                   x0: np.ndarray | None = None):
    """Full-gradient descent on the global objective; the reference the
    federated trajectory is compared against."""
    dim = tasks[0].features.shape[1]
    x = np.zeros(dim) if x0 is None else np.array(x0, dtype=float)
    trace = []
    for t in range(rounds):
        x = x - learning_rate * global_gradient(tasks, x)
        trace.append((t, global_loss(tasks, x),
                      float(np.linalg.norm(global_gradient(tasks, x)))))
    return trace


def make_synthetic_tasks(num_devices: int, dim: int, samples_per_device: int,
                         rng: np.random.Generator, heterogeneity: float = 0.0,
                         noise_std: float = 0.1, local_steps: int = 5,
                         learning_rate: float = 1e-3, batch_size: int = 32):
    """Linear-regression tasks with a controllable spread of per-device
    optima: device i fits b = A (w* + heterogeneity*z_i) + noise. Larger
    heterogeneity raises the gradient-dissimilarity level across devices.
    Aggregation weights are the (equal) sample-size ratios."""
    w_star = rng.standard_normal(dim)
    tasks = []
    for i in range(num_devices):
        w_i = w_star + heterogeneity * rng.standard_normal(dim)
        a = rng.standard_normal((samples_per_device, dim)) / math.sqrt(samples_per_device)
        b = a @ w_i + noise_std * rng.standard_normal(samples_per_device)
        tasks.append(LocalTask(device_id=i, features=a, targets=b,
                               weight=1.0 / num_devices, local_steps=local_steps,
                               learning_rate=learning_rate, batch_size=batch_size))
    return tasks


def smoothness_constant(tasks) -> float:
    """Largest curvature among the device objectives and the global one."""
    hessians = [t.features.T @ t.features for t in tasks]
    l_local = max(float(np.linalg.eigvalsh(h)[-1]) for h in hessians)
    h_global = sum(t.weight * h for t, h in zip(tasks, hessians))
    return max(l_local, float(np.linalg.eigvalsh(h_global)[-1]))


def learning_rate_bound(smoothness: float, local_steps: int, dissimilarity_alpha: float = 1.0) -> float:
    """Step-size cap min{1/(2LE), 1/(L*sqrt(2E(E-1)(2a+1)))} under which the
    federated recursion is guaranteed stable; for E = 1 only the first term
    applies."""
    if smoothness <= 0 or local_steps < 1 or dissimilarity_alpha < 1:
        raise ValueError("need smoothness > 0, local_steps >= 1, alpha >= 1")
    cap = 1.0 / (2.0 * smoothness * local_steps)
    if local_steps > 1:
        cap = min(cap, 1.0 / (smoothness * math.sqrt(
            2.0 * local_steps * (local_steps - 1) * (2.0 * dissimilarity_alpha + 1.0))))
    return cap


def check_learning_rate(tasks, smoothness: float | None = None,
                        dissimilarity_alpha: float = 1.0) -> float:
    """Warn when any task's learning rate exceeds the stability cap; returns
    the cap."""
    if smoothness is None:
        smoothness = smoothness_constant(tasks)
    cap = learning_rate_bound(smoothness, max(t.local_steps for t in tasks),
                              dissimilarity_alpha)
    worst = max(t.learning_rate for t in tasks)
    if worst > cap:
        warnings.warn(
            f"learning rate {worst:g} exceeds the stability cap {cap:g} "
            f"(smoothness={smoothness:g})", RuntimeWarning, stacklevel=2)
    return cap


def write_loss_trace_csv(path, trace, energy_per_round=None) -> None:
    """CSV export (round, global_loss, grad_norm, cumulative_energy_j)."""
    import csv

    cumulative = 0.0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "global_loss", "grad_norm", "cumulative_energy_j"])
        for k, (t, loss, gnorm) in enumerate(trace):
            if energy_per_round is not None:
                cumulative += energy_per_round[k]
            w.writerow([t, repr(loss), repr(gnorm), repr(cumulative)])
