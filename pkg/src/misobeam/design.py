"""Compile precoder designs into standard-form cone programs.

Two designs are provided, both minimizing total transmit power subject to
per-user SINR floors:

* the nominal design, which trusts the channel estimates exactly, and
* the robust design, which protects the SINR constraints against every
  channel error inside a per-user sphere of radius kappa * delta_k by a
  structure-preserving robust counterpart: each user's constraint gains an
  aggregate protection level y_k fed by per-coordinate perturbation bounds
  t_{k,i}, one pair of cones per real channel coordinate, so the robust
  program is still a second-order cone program.

Both builders work in real variables: the complex precoder B is represented
by its stacked real and imaginary parts, and the rotation freedom of each
column is used to make h_k b_k real at the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conic, model
from .conic import ConeProgram, SecondOrder, Solution, SolverSettings, SolveStatus
from .model import ChannelSet, Precoder, QosSpec

PERTURBATION_SIGMA_MODES = ("paper", "zero")


@dataclass(frozen=True)
class UncertaintySpec:
    """Per-user uncertainty radii and the protection relaxation factor.

    kappa in [0, 1] scales the protected radius to kappa * delta_k; 1 gives
    the full worst-case guarantee, smaller values trade guaranteed
    robustness for transmit power.
    """

    delta: np.ndarray
    kappa: float = 1.0

    BALANCED_KAPPA = 0.25  # empirically good power/robustness trade-off

    def __post_init__(self):
        d = np.atleast_1d(np.array(self.delta, dtype=float))
        if d.ndim != 1 or np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("uncertainty radii must be finite and nonnegative")
        if not (0.0 <= self.kappa <= 1.0):
            raise ValueError("kappa must lie in [0, 1]")
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    @classmethod
    def balanced(cls, delta) -> "UncertaintySpec":
        return cls(delta=delta, kappa=cls.BALANCED_KAPPA)

    @property
    def n_users(self) -> int:
        return self.delta.shape[0]


class ProgramLayout:
    """Variable index map for the nominal design program.

    Real decision variables are ordered [vec(Re B), vec(Im B), tau]
    (column-major vec).  ``cone_tags`` records, per cone in program order,
    a (tag, user, coordinate) provenance triple.
    """

    def __init__(self, n_tx: int, n_users: int):
        self.n_tx = n_tx
        self.n_users = n_users
        self.num_vars = 2 * n_tx * n_users + 1
        self.cone_tags: list[tuple[str, int | None, int | None]] = []

    def b_re(self, i: int, k: int) -> int:
        return k * self.n_tx + i

    def b_im(self, i: int, k: int) -> int:
        return self.n_tx * self.n_users + k * self.n_tx + i

    @property
    def tau(self) -> int:
        return 2 * self.n_tx * self.n_users

    def var_index(self) -> dict:
        """Name -> column bijection onto 0..num_vars-1."""
        index = {}
        for k in range(self.n_users):
            for i in range(self.n_tx):
                index[("b_re", i, k)] = self.b_re(i, k)
                index[("b_im", i, k)] = self.b_im(i, k)
        index["tau"] = self.tau
        return index


class RobustProgramLayout(ProgramLayout):
    """Variable index map for the robust design program.

    Adds the per-user protection level y_k and the per-user,
    per-real-coordinate perturbation bounds t_{k,i}, i in 0..2 n_tx - 1.
    """

    def __init__(self, n_tx: int, n_users: int):
        super().__init__(n_tx, n_users)
        self.num_vars = 4 * n_tx * n_users + n_users + 1

    def y(self, k: int) -> int:
        return 2 * self.n_tx * self.n_users + 1 + k

    def t(self, k: int, i: int) -> int:
        return 2 * self.n_tx * self.n_users + 1 + self.n_users + k * 2 * self.n_tx + i

    def var_index(self) -> dict:
        index = super().var_index()
        for k in range(self.n_users):
            index[("y", k)] = self.y(k)
            for i in range(2 * self.n_tx):
                index[("t", k, i)] = self.t(k, i)
        return index


@dataclass(frozen=True)
class DesignResult:
    """Outcome of a design pipeline; precoder is None unless Optimal."""

    precoder: Precoder | None
    power: float
    status: SolveStatus
    solution: Solution = field(repr=False, default=None)


def _sinr_coefficients(qos: QosSpec) -> np.ndarray:
    # SINR_k >= gamma_k  <=>  ||[h_k B, sigma_k]|| <= a_k Re(h_k b_k)
    return np.sqrt(1.0 + 1.0 / qos.gamma)


def _check_dims(channels: ChannelSet, qos: QosSpec):
    if qos.n_users != channels.n_users:
        raise ValueError(
            f"qos covers {qos.n_users} users but channels have {channels.n_users}"
        )


def _row_products_block(layout, h_re, h_im, A, row0):
    """Fill rows row0.. of A with the 2 n_u entries of h_bar_k @ B_bar,
    i.e. Re(h_k b_j) for j < n_u then Im(h_k b_j)."""
    nt, nu = layout.n_tx, layout.n_users
    for j in range(nu):
        for i in range(nt):
            A[row0 + j, layout.b_re(i, j)] = -h_re[i]
            A[row0 + j, layout.b_im(i, j)] = h_im[i]
            A[row0 + nu + j, layout.b_im(i, j)] = -h_re[i]
            A[row0 + nu + j, layout.b_re(i, j)] = -h_im[i]


def build_nominal(channels: ChannelSet, qos: QosSpec) -> tuple[ConeProgram, ProgramLayout]:
    """Minimum-power design meeting every SINR target at the estimates.

    Variables [Re B, Im B, tau]; minimize tau subject to ||vec(B)|| <= tau
    and, per user, ||[h_bar_k B_bar, sigma_k]|| <= a_k (h_bar_k . b_bar_k).
    """
    _check_dims(channels, qos)
    nt, nu = channels.n_tx, channels.n_users
    layout = ProgramLayout(nt, nu)
    n = layout.num_vars
    a = _sinr_coefficients(qos)
    h_re, h_im = channels.rows.real, channels.rows.imag

    power_dim = 1 + 2 * nt * nu
    user_dim = 2 * nu + 2
    rows = power_dim + nu * user_dim
    A = np.zeros((rows, n))
    b = np.zeros(rows)
    cones: list[SecondOrder] = []

    # total-power epigraph ||vec(B)|| <= tau
    A[0, layout.tau] = -1.0
    A[1 : power_dim, : 2 * nt * nu] = -np.eye(2 * nt * nu)
    cones.append(SecondOrder(power_dim))
    layout.cone_tags.append(("objective-epigraph", None, None))

    row = power_dim
    for k in range(nu):
        for i in range(nt):
            A[row, layout.b_re(i, k)] = -a[k] * h_re[k, i]
            A[row, layout.b_im(i, k)] = a[k] * h_im[k, i]
        _row_products_block(layout, h_re[k], h_im[k], A, row + 1)
        b[row + 1 + 2 * nu] = qos.sigma[k]
        cones.append(SecondOrder(user_dim))
        layout.cone_tags.append(("sinr", k, None))
        row += user_dim

    objective = np.zeros(n)
    objective[layout.tau] = 1.0
    return ConeProgram(n, objective, A, b, tuple(cones)), layout


def build_robust(
    channels: ChannelSet,
    qos: QosSpec,
    unc: UncertaintySpec,
    perturbation_sigma: str = "paper",
) -> tuple[ConeProgram, RobustProgramLayout]:
    """Robust counterpart protecting every SINR constraint over the sphere
    of radius kappa * delta_k around each channel estimate.

    Per user k the program carries:
      * main-robust:       ||[h_bar_k B_bar, sigma_k]|| <= a_k h_bar_k.b_bar_k
                           - (kappa delta_k) y_k
      * perturbation-plus/minus, per real coordinate i of the channel:
                           ||[row_i(B_bar), sigma_k]|| -/+ a_k B_bar[i, k] <= t_{k,i}
      * aggregation:       ||t_k|| <= y_k

    ``perturbation_sigma`` selects what stands in for the noise term inside
    the perturbation cones: mode "paper" keeps sigma_k there (conservative
    default), mode "zero" puts 0, bounding only the genuinely perturbed
    data (the strict linearization).
    """
    _check_dims(channels, qos)
    if unc.n_users != channels.n_users:
        raise ValueError(
            f"uncertainty covers {unc.n_users} users but channels have {channels.n_users}"
        )
    if perturbation_sigma not in PERTURBATION_SIGMA_MODES:
        raise ValueError(f"perturbation_sigma must be one of {PERTURBATION_SIGMA_MODES}")

    nt, nu = channels.n_tx, channels.n_users
    layout = RobustProgramLayout(nt, nu)
    n = layout.num_vars
    a = _sinr_coefficients(qos)
    h_re, h_im = channels.rows.real, channels.rows.imag
    radius = unc.kappa * unc.delta

    power_dim = 1 + 2 * nt * nu
    user_dim = 2 * nu + 2
    agg_dim = 1 + 2 * nt
    rows = power_dim + nu * (user_dim + 2 * 2 * nt * user_dim + agg_dim)
    A = np.zeros((rows, n))
    b = np.zeros(rows)
    cones: list[SecondOrder] = []

    A[0, layout.tau] = -1.0
    A[1 : power_dim, : 2 * nt * nu] = -np.eye(2 * nt * nu)
    cones.append(SecondOrder(power_dim))
    layout.cone_tags.append(("objective-epigraph", None, None))

    def fill_bbar_row(row: int, i: int):
        # slack entries 1..2 nu of a perturbation cone: row i of B_bar
        if i < nt:
            for j in range(nu):
                A[row + 1 + j, layout.b_re(i, j)] = -1.0
                A[row + 1 + nu + j, layout.b_im(i, j)] = -1.0
        else:
            for j in range(nu):
                A[row + 1 + j, layout.b_im(i - nt, j)] = 1.0
                A[row + 1 + nu + j, layout.b_re(i - nt, j)] = -1.0

    row = power_dim
    for k in range(nu):
        # main robust SINR cone
        for i in range(nt):
            A[row, layout.b_re(i, k)] = -a[k] * h_re[k, i]
            A[row, layout.b_im(i, k)] = a[k] * h_im[k, i]
        A[row, layout.y(k)] = radius[k]
        _row_products_block(layout, h_re[k], h_im[k], A, row + 1)
        b[row + 1 + 2 * nu] = qos.sigma[k]
        cones.append(SecondOrder(user_dim))
        layout.cone_tags.append(("main-robust", k, None))
        row += user_dim

        sigma_inside = qos.sigma[k] if perturbation_sigma == "paper" else 0.0
        for i in range(2 * nt):
            for sign, tag in ((1.0, "perturbation-plus"), (-1.0, "perturbation-minus")):
                # slack[0] = t_{k,i} +/- a_k B_bar[i, k]
                A[row, layout.t(k, i)] = -1.0
                if i < nt:
                    A[row, layout.b_re(i, k)] = -sign * a[k]
                else:
                    A[row, layout.b_im(i - nt, k)] = sign * a[k]
                fill_bbar_row(row, i)
                b[row + 1 + 2 * nu] = sigma_inside
                cones.append(SecondOrder(user_dim))
                layout.cone_tags.append((tag, k, i))
                row += user_dim

        # aggregation ||t_k|| <= y_k
        A[row, layout.y(k)] = -1.0
        for i in range(2 * nt):
            A[row + 1 + i, layout.t(k, i)] = -1.0
        cones.append(SecondOrder(agg_dim))
        layout.cone_tags.append(("aggregation", k, None))
        row += agg_dim

    objective = np.zeros(n)
    objective[layout.tau] = 1.0
    return ConeProgram(n, objective, A, b, tuple(cones)), layout


def extract_precoder(solution: Solution, layout: ProgramLayout) -> Precoder:
    """Reassemble the complex precoder from an Optimal solution's variables."""
    if solution.status != SolveStatus.OPTIMAL:
        raise ValueError(f"cannot extract a precoder from a {solution.status.value} solution")
    nt, nu = layout.n_tx, layout.n_users
    x = solution.x
    re = x[: nt * nu].reshape((nu, nt)).T
    im = x[nt * nu : 2 * nt * nu].reshape((nu, nt)).T
    return Precoder(re + 1j * im)


def design_nominal(
    channels: ChannelSet,
    qos: QosSpec,
    settings: SolverSettings | None = None,
) -> DesignResult:
    """Build, solve and extract the nominal design; non-Optimal solver
    statuses propagate in the result instead of raising."""
    program, layout = build_nominal(channels, qos)
    solution = conic.solve(program, settings)
    return _finish(solution, layout)


def design_robust(
    channels: ChannelSet,
    qos: QosSpec,
    unc: UncertaintySpec,
    settings: SolverSettings | None = None,
    perturbation_sigma: str = "paper",
) -> DesignResult:
    """Build, solve and extract the robust design."""
    program, layout = build_robust(channels, qos, unc, perturbation_sigma)
    solution = conic.solve(program, settings)
    return _finish(solution, layout)


def _finish(solution: Solution, layout: ProgramLayout) -> DesignResult:
    if solution.status != SolveStatus.OPTIMAL:
        return DesignResult(precoder=None, power=float("nan"),
                            status=solution.status, solution=solution)
    precoder = extract_precoder(solution, layout)
    return DesignResult(precoder=precoder, power=model.transmit_power(precoder),
                        status=solution.status, solution=solution)
