"""Learning one-step history predictors from recorded data.

For each sensor subset the learner regresses the shifted history matrix on
the stacked [current input; history] data. When the data matrix reaches
the certifying rank m(n+1) + n the minimum-norm solution reproduces the
plant exactly on every input/output sequence the plant can generate, and
it is independent of which informative recording produced it.

Note the certifying rank: the stacked matrix has m(n+1) + q*n rows, but
rows built from an n-state plant's outputs are linear combinations of the
n state rows and the input-history rows, so m(n+1) + n is the largest rank
attack-free data can attain (and does attain, given an exciting input, a
controllable plant and an observable subset). Observed rank differing from
the certifying value - in either direction - marks data the plant cannot
have produced, which is what the replay test exploits.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .attacks import SensorSubset, enumerate_subsets
from .datamat import SubsetDataMatrices, Trajectory, build_subset_matrices, hankel
from .linalg import DEFAULT_TOL, Tolerance, as_matrix, numerical_rank
from .plant import StateSpace


@dataclass(frozen=True)
class RankReport:
    """Rank certificate for one subset's stacked data matrix.

    observed: numerical rank of [current inputs; histories].
    required: m(n+1) + n, the exactness-certifying rank.
    rows: m(n+1) + q*n, the row count (full row rank is unattainable for
        q >= 2; see module docstring).
    holds: observed == required.
    """

    observed: int
    required: int
    rows: int
    holds: bool


class LearningError(RuntimeError):
    """Raised when data does not certify an exact predictor."""

    def __init__(self, subset: SensorSubset, report: RankReport):
        self.subset = subset
        self.report = report
        super().__init__(
            f"subset {subset.indices}: data rank {report.observed} does not reach "
            f"the certifying rank {report.required} (stacked rows: {report.rows})")


def stacked_data(mats: SubsetDataMatrices) -> np.ndarray:
    """[current inputs; history columns]: the regressor matrix."""
    return np.vstack([mats.u_now, mats.states])


def certifying_rank(m: int, n: int) -> int:
    """Largest rank attack-free data can attain: m(n+1) + n."""
    return m * (n + 1) + n


def rank_condition(mats: SubsetDataMatrices, tol: Tolerance = DEFAULT_TOL) -> RankReport:
    """Rank certificate of the stacked data matrix for one subset."""
    stacked = stacked_data(mats)
    m, n, q = mats.input_dim, mats.order, mats.output_dim
    observed = numerical_rank(stacked, tol)
    required = certifying_rank(m, n)
    return RankReport(observed, required, m * (n + 1) + q * n, observed == required)


@dataclass(frozen=True)
class SubsetPredictor:
    """Learned one-step predictor of one subset's stacked history.

    lam maps [u[k]; history[k]] to history[k+1]; residual is the max-abs
    training misfit recorded at learning time.
    """

    subset: SensorSubset
    lam: np.ndarray
    residual: float
    report: Optional[RankReport] = None


def learn_lambda(mats: SubsetDataMatrices, tol: Tolerance = DEFAULT_TOL) -> SubsetPredictor:
    """Fit the one-step predictor for one subset.

    Uses the Moore-Penrose pseudo-inverse of the stacked data: with the
    certifying rank this is exact on everything the plant can produce and
    unique over informative recordings. Raises LearningError (embedding the
    rank report) when the certificate fails.
    """
    report = rank_condition(mats, tol)
    if not report.holds:
        raise LearningError(mats.subset, report)
    stacked = stacked_data(mats)
    lam = mats.states_next @ np.linalg.pinv(stacked, rcond=tol.rank_rel * max(stacked.shape))
    residual = float(np.max(np.abs(mats.states_next - lam @ stacked)))
    scale = 1.0 + float(np.max(np.abs(mats.states_next)))
    if residual > tol.residual_abs * scale:
        raise LearningError(mats.subset, report)
    return SubsetPredictor(mats.subset, lam, residual, report)


def predict(lam, u_k, state) -> np.ndarray:
    """One-step prediction: lam @ [u_k; state]."""
    lam_arr = as_matrix(lam, "lam")
    u_vec = np.asarray(u_k, dtype=float).reshape(-1)
    x_vec = np.asarray(state, dtype=float).reshape(-1)
    if u_vec.size + x_vec.size != lam_arr.shape[1]:
        raise ValueError(
            f"predictor expects {lam_arr.shape[1]} entries, got {u_vec.size + x_vec.size}")
    return lam_arr @ np.concatenate([u_vec, x_vec])


@dataclass(frozen=True)
class DataDrivenModel:
    """Per-subset predictors plus the learning metadata."""

    predictors: tuple[SubsetPredictor, ...]
    n: int
    m: int
    n_sensors: int
    max_attacked: int
    columns: int
    pe_seed: Optional[int] = None

    def predictor(self, subset_id: int) -> SubsetPredictor:
        for entry in self.predictors:
            if entry.subset.id == subset_id:
                return entry
        raise KeyError(f"no predictor for subset id {subset_id}")


def learn_model(traj: Trajectory, n_sensors: int, max_attacked: int, n: int,
                columns: int, tol: Tolerance = DEFAULT_TOL,
                pe_seed: Optional[int] = None) -> DataDrivenModel:
    """Learn predictors for every cardinality-(N - M) subset from one recording."""
    if traj.output_dim != n_sensors:
        raise ValueError(
            f"trajectory has {traj.output_dim} outputs, expected {n_sensors}")
    predictors = []
    for subset in enumerate_subsets(n_sensors, max_attacked):
        mats = build_subset_matrices(traj, subset, n, columns)
        predictors.append(learn_lambda(mats, tol))
    return DataDrivenModel(tuple(predictors), n, traj.input_dim, n_sensors,
                           max_attacked, columns, pe_seed)


def save_learned_model(model: DataDrivenModel, path) -> None:
    """Write a learned model as JSON."""
    payload = {
        "N": model.n_sensors,
        "M": model.max_attacked,
        "n": model.n,
        "m": model.m,
        "T": model.columns,
        "pe_seed": model.pe_seed,
        "subsets": [
            {
                "id": entry.subset.id,
                "indices": list(entry.subset.indices),
                "lambda": entry.lam.tolist(),
                "residual": entry.residual,
            }
            for entry in model.predictors
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_learned_model(path) -> DataDrivenModel:
    """Read a learned model written by save_learned_model."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    predictors = tuple(
        SubsetPredictor(
            SensorSubset(int(entry["id"]), tuple(int(i) for i in entry["indices"])),
            np.array(entry["lambda"], dtype=float),
            float(entry["residual"]),
        )
        for entry in payload["subsets"]
    )
    pe_seed = payload.get("pe_seed")
    return DataDrivenModel(predictors, int(payload["n"]), int(payload["m"]),
                           int(payload["N"]), int(payload["M"]), int(payload["T"]),
                           None if pe_seed is None else int(pe_seed))


@dataclass(frozen=True)
class RankOracleReport:
    """Model-based factorization of one subset's output-Hankel rank.

    The depth-n output Hankel factors through [obs_matrix, toeplitz] acting
    on states and input histories, so its rank is bounded by
    rank(obs_matrix) + rank(toeplitz). Used only in tests, where the plant
    is known.
    """

    obs_matrix: np.ndarray
    toeplitz: np.ndarray
    rank_obs: int
    rank_toeplitz: int
    predicted_max_rank: int
    observed_rank: int
    bound_holds: bool


def rank_obsv_oracle(ss: StateSpace, subset: SensorSubset, n: int, traj: Trajectory,
                     columns: Optional[int] = None,
                     tol: Tolerance = DEFAULT_TOL) -> RankOracleReport:
    """Build the observability/Toeplitz factors of the depth-n output Hankel
    and compare their rank sum against the rank observed in the data.

    obs_matrix stacks C_sub A^i (i = 0..n-1); toeplitz block (i, l) is
    C_sub A^{i-l-1} B for l < i and zero otherwise (first block row and
    last block column are zero).
    """
    rows = [i - 1 for i in subset.indices]
    c_sub = ss.C[rows, :]
    q = len(rows)
    if columns is None:
        columns = traj.length - n
    obs_blocks = []
    row = c_sub
    for _ in range(n):
        obs_blocks.append(row)
        row = row @ ss.A
    obs_matrix = np.vstack(obs_blocks)
    m = ss.input_dim
    toeplitz = np.zeros((q * n, n * m))
    markov = [c_sub @ np.linalg.matrix_power(ss.A, i) @ ss.B for i in range(max(n - 1, 0))]
    for i in range(n):
        for l in range(i):
            toeplitz[i * q:(i + 1) * q, l * m:(l + 1) * m] = markov[i - l - 1]
    z = traj.y[rows, :]
    z_hankel = hankel(z, 0, n, columns)
    rank_obs = numerical_rank(obs_matrix, tol)
    rank_toe = numerical_rank(toeplitz, tol) if np.any(toeplitz) else 0
    observed = numerical_rank(z_hankel, tol) if np.any(z_hankel) else 0
    predicted = rank_obs + rank_toe
    return RankOracleReport(obs_matrix, toeplitz, rank_obs, rank_toe,
                            predicted, observed, observed <= predicted)
