"""Node-local objectives and the oracle surfaces the engine consumes.

Each objective exposes primal gradients, an optional conjugate (dual)
gradient, stochastic gradients, component gradients for finite sums,
Bregman divergences, and the strong-convexity/smoothness constants the
stepsize schedules need.  For finite-sum objectives the node gradient is
*defined* as the fixed-order average of the component gradients, so
``(1/m) sum_j component_grad(i, j, x) == grad(i, x)`` holds bitwise.
"""

import numpy as np

from .errors import DualUnavailableError, InvalidParametersError, NoConvergenceError

_REF_TOL = 1e-12
_REF_CAP = 10**6


def _reference_minimize(grad_fn, x0, tol=_REF_TOL, cap=_REF_CAP):
    """Gradient descent with backtracking, run to a tiny gradient norm.

    The line search accepts a step when it strictly decreases the gradient
    norm (value-based tests cannot certify progress once the decrease
    falls below float resolution, long before ||grad|| reaches 1e-12).
    """
    x = np.array(x0, dtype=float)
    g = grad_fn(x)
    eta = 1.0
    for _ in range(cap):
        gnorm_sq = float(g @ g)
        if np.sqrt(gnorm_sq) <= tol:
            return x
        eta = min(eta * 2.0, 1e12)
        while True:
            x_new = x - eta * g
            g_new = grad_fn(x_new)
            if float(g_new @ g_new) < gnorm_sq:
                break
            eta *= 0.5
            if eta < 1e-30:
                raise NoConvergenceError("backtracking stalled in reference solver")
        x, g = x_new, g_new
    raise NoConvergenceError(f"reference solver did not reach ||grad|| <= {tol} in {cap} iterations")


class Objective:
    """Base oracle bundle; concrete objectives override what they support."""

    n_nodes: int
    dim: int
    mu: float
    L: float
    m: int | None = None
    m_per_node = None
    sigma_sq: float | None = None

    _solution = None

    def default_x0(self) -> np.ndarray:
        return np.zeros((self.dim, self.n_nodes))

    def value(self, i: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_all(self, X: np.ndarray) -> np.ndarray:
        out = np.empty_like(X)
        for i in range(self.n_nodes):
            out[:, i] = self.grad(i, X[:, i])
        return out

    def dual_grad(self, i: int, z: np.ndarray) -> np.ndarray:
        raise DualUnavailableError(f"{type(self).__name__} has no closed-form conjugate")

    def dual_grad_all(self, Z: np.ndarray) -> np.ndarray:
        out = np.empty_like(Z)
        for i in range(self.n_nodes):
            out[:, i] = self.dual_grad(i, Z[:, i])
        return out

    def stoch_grad(self, i: int, x: np.ndarray, rng) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no stochastic oracle")

    def stoch_grad_all(self, X: np.ndarray, rng) -> np.ndarray:
        out = np.empty_like(X)
        for i in range(self.n_nodes):
            out[:, i] = self.stoch_grad(i, X[:, i], rng)
        return out

    def component_grad(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} is not finite-sum structured")

    def full_component_avg(self, i: int, x: np.ndarray) -> np.ndarray:
        if self.m_per_node is None:
            raise NotImplementedError(f"{type(self).__name__} is not finite-sum structured")
        m_i = int(self.m_per_node[i])
        acc = np.zeros(self.dim)
        for j in range(m_i):
            acc += self.component_grad(i, j, x)
        return acc / m_i

    def bregman(self, i: int, x: np.ndarray, y: np.ndarray) -> float:
        diff = np.asarray(x, float) - np.asarray(y, float)
        return float(self.value(i, x) - self.value(i, y) - self.grad(i, y) @ diff)

    def grad_cost(self, i: int) -> int:
        """Oracle-call bookkeeping: component evaluations per full gradient."""
        return int(self.m_per_node[i]) if self.m_per_node is not None else 1

    def centralized_solution(self):
        """Minimizer of the node average and the per-node dual optima z_i* = grad_i(x*)."""
        if self._solution is None:
            x_star = self._solve_reference()
            z_star = np.empty((self.dim, self.n_nodes))
            for i in range(self.n_nodes):
                z_star[:, i] = self.grad(i, x_star)
            self._solution = (x_star, z_star)
        return self._solution

    def _solve_reference(self) -> np.ndarray:
        def grd(x):
            return self.grad_all(np.tile(x[:, None], (1, self.n_nodes))).mean(axis=1)

        return _reference_minimize(grd, np.zeros(self.dim))


class ConsensusQuadratic(Objective):
    """f_i(x) = 0.5 ||x - a_i||^2; the global minimizer is the mean of the targets.

    ``noise_var`` is the total stochastic-gradient variance E||g - grad||^2
    injected by the stochastic oracle (additive Gaussian noise), i.e. the
    per-node sigma_i^2 of the variance assumption.
    """

    def __init__(self, targets: np.ndarray, noise_var: float = 0.0):
        targets = np.asarray(targets, dtype=float)
        if targets.ndim != 2:
            raise InvalidParametersError("targets must be a d-by-n matrix")
        self.targets = targets
        self.dim, self.n_nodes = targets.shape
        self.mu = 1.0
        self.L = 1.0
        self.noise_var = float(noise_var)
        self.sigma_sq = float(noise_var)

    def default_x0(self):
        return self.targets.copy()

    def value(self, i, x):
        diff = np.asarray(x, float) - self.targets[:, i]
        return 0.5 * float(diff @ diff)

    def grad(self, i, x):
        return np.asarray(x, float) - self.targets[:, i]

    def grad_all(self, X):
        return X - self.targets

    def dual_grad(self, i, z):
        return np.asarray(z, float) + self.targets[:, i]

    def dual_grad_all(self, Z):
        return Z + self.targets

    def stoch_grad(self, i, x, rng):
        g = self.grad(i, x)
        if self.noise_var > 0.0:
            g = g + rng.standard_normal(self.dim) * np.sqrt(self.noise_var / self.dim)
        return g

    def stoch_grad_all(self, X, rng):
        G = self.grad_all(X)
        if self.noise_var > 0.0:
            G = G + rng.standard_normal(X.shape) * np.sqrt(self.noise_var / self.dim)
        return G

    def bregman(self, i, x, y):
        diff = np.asarray(x, float) - np.asarray(y, float)
        return 0.5 * float(diff @ diff)

    def _solve_reference(self):
        return self.targets.mean(axis=1)


class LeastSquaresObjective(Objective):
    """Finite-sum ridge least squares per node.

    f_ij(x) = 0.5 (a_ij^T x - b_ij)^2 + (ridge/2) ||x||^2, f_i the average
    over the node's m components.  Quadratic, so the conjugate gradient is
    a linear solve and all constants are exact.
    """

    def __init__(self, rows, targets, ridge: float = 0.0):
        if len(rows) != len(targets) or not rows:
            raise InvalidParametersError("rows and targets must be non-empty, same length")
        self.rows = [np.asarray(A, dtype=float) for A in rows]
        self.rhs = [np.asarray(b, dtype=float) for b in targets]
        self.n_nodes = len(self.rows)
        self.dim = self.rows[0].shape[1]
        counts = {A.shape[0] for A in self.rows}
        if len(counts) != 1:
            raise InvalidParametersError("all nodes need the same component count")
        self.m = counts.pop()
        self.m_per_node = np.full(self.n_nodes, self.m, dtype=int)
        self.ridge = float(ridge)

        # H_i = Gram/m + ridge I and c_i define the exact node gradients
        self._H = []
        self._c = []
        eye = np.eye(self.dim)
        for A, b in zip(self.rows, self.rhs):
            self._H.append(A.T @ A / self.m + self.ridge * eye)
            self._c.append(A.T @ b / self.m)
        self.mu = float(min(np.linalg.eigvalsh(H)[0] for H in self._H))
        if self.mu <= 0.0:
            raise InvalidParametersError("objective is not strongly convex; add ridge")
        self.L = max(float(max(np.linalg.eigvalsh(H)[-1] for H in self._H)),
                     self._component_smoothness())

    def _component_smoothness(self) -> float:
        """Smallest constant for the mean-squared component-gradient inequality.

        max_i lambda_max(H^{-1/2} M H^{-1/2}) with M = (1/m) sum_j (a a^T + ridge I)^2.
        """
        worst = 0.0
        eye = np.eye(self.dim)
        for A, H in zip(self.rows, self._H):
            norms_sq = np.sum(A * A, axis=1)
            M = A.T @ (A * (norms_sq + 2.0 * self.ridge)[:, None]) / self.m
            M += self.ridge**2 * eye
            evals, vecs = np.linalg.eigh(H)
            inv_half = (vecs / np.sqrt(evals)) @ vecs.T
            worst = max(worst, float(np.linalg.eigvalsh(inv_half @ M @ inv_half)[-1]))
        return worst

    def value(self, i, x):
        x = np.asarray(x, float)
        r = self.rows[i] @ x - self.rhs[i]
        return 0.5 * float(r @ r) / self.m + 0.5 * self.ridge * float(x @ x)

    def component_grad(self, i, j, x):
        x = np.asarray(x, float)
        a = self.rows[i][j]
        return (float(a @ x) - self.rhs[i][j]) * a + self.ridge * x

    def grad(self, i, x):
        return self.full_component_avg(i, x)

    def dual_grad(self, i, z):
        return np.linalg.solve(self._H[i], np.asarray(z, float) + self._c[i])

    def stoch_grad(self, i, x, rng):
        j = int(rng.integers(0, self.m))
        return self.component_grad(i, j, x)

    def _solve_reference(self):
        # closed-form stationary point, then verify the first-order condition
        H = sum(self._H) / self.n_nodes
        c = sum(self._c) / self.n_nodes
        x = np.linalg.solve(H, c)

        def grd(y):
            acc = np.zeros(self.dim)
            for i in range(self.n_nodes):
                acc += self.grad(i, y)
            return acc / self.n_nodes

        g = grd(x)
        if np.linalg.norm(g) > _REF_TOL:
            x = _reference_minimize(grd, x)
        return x


def _sigmoid(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class LogisticObjective(Objective):
    """Regularized logistic regression split across nodes.

    f_i(x) = (1/m_i) sum_j log(1 + exp(-b_j a_j^T x)) + (lam/2) ||x||^2 with
    labels in {-1, +1}.  The default lam = 1/(total samples) makes the node
    average match a single global (1/(2m))||x||^2 regularizer.
    """

    def __init__(self, node_rows, node_labels, lam: float | None = None):
        if len(node_rows) != len(node_labels) or not node_rows:
            raise InvalidParametersError("node_rows and node_labels must be non-empty, same length")
        self.rows = [np.asarray(A, dtype=float) for A in node_rows]
        self.labels = [np.asarray(b, dtype=float) for b in node_labels]
        for A, b in zip(self.rows, self.labels):
            if A.shape[0] != b.shape[0] or A.shape[0] == 0:
                raise InvalidParametersError("each node needs matching, non-empty rows and labels")
            if not np.all(np.isin(b, (-1.0, 1.0))):
                raise InvalidParametersError("labels must be -1/+1")
        self.n_nodes = len(self.rows)
        self.dim = self.rows[0].shape[1]
        self.m_per_node = np.array([A.shape[0] for A in self.rows], dtype=int)
        self.m = int(self.m_per_node.max())
        total = int(self.m_per_node.sum())
        self.lam = float(lam) if lam is not None else 1.0 / total
        self.mu = self.lam
        # conservative: the node Gram eigenvalue is bounded by the row-norm sum
        self.L = self.lam + max(
            float(np.sum(A * A)) / (4.0 * A.shape[0]) for A in self.rows
        )

    def value(self, i, x):
        x = np.asarray(x, float)
        t = self.labels[i] * (self.rows[i] @ x)
        loss = float(np.mean(np.logaddexp(0.0, -t)))
        return loss + 0.5 * self.lam * float(x @ x)

    def component_grad(self, i, j, x):
        x = np.asarray(x, float)
        a = self.rows[i][j]
        b = self.labels[i][j]
        t = b * float(a @ x)
        if t >= 0.0:
            e = np.exp(-t)
            s = -b * e / (1.0 + e)
        else:
            s = -b / (1.0 + np.exp(t))
        return s * a + self.lam * x

    def grad(self, i, x):
        return self.full_component_avg(i, x)

    def stoch_grad(self, i, x, rng):
        j = int(rng.integers(0, int(self.m_per_node[i])))
        return self.component_grad(i, j, x)

    def _solve_reference(self):
        stacked = np.vstack(self.rows)
        lab = np.concatenate(self.labels)
        weights = np.concatenate([
            np.full(A.shape[0], 1.0 / (A.shape[0] * self.n_nodes)) for A in self.rows
        ])

        def grd(x):
            t = lab * (stacked @ x)
            s = -lab * _sigmoid(-t) * weights
            return stacked.T @ s + self.lam * x

        return _reference_minimize(grd, np.zeros(self.dim))
