"""Exception hierarchy.

Input problems (bad files, invalid trees) derive from :class:`ModelError`;
numerical failures of an otherwise valid model derive from
:class:`NumericalError`. The CLI maps the two families to distinct exit codes.
"""


class FairHedgeError(Exception):
    pass


class ModelError(FairHedgeError, ValueError):
    """The model description itself is invalid."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"{message} (node {node!r})")
        self.node = node


class ProbabilityError(ModelError):
    pass


class CoverageError(ModelError):
    pass


class NumericalError(FairHedgeError):
    pass


class NonPositiveNumeraire(NumericalError):
    def __init__(self, node, value, offenders=()):
        super().__init__(f"numeraire value {value:.6g} is not strictly positive at node {node!r}")
        self.node = node
        self.value = value
        self.offenders = tuple(offenders)


class SingularCovariance(NumericalError):
    def __init__(self, node, rcond, time=None, eps=None):
        where = f"node {node!r}" if time is None else f"node {node!r} (step into time {time})"
        msg = f"weighted covariance matrix is singular at {where}: reciprocal condition {rcond:.3g}"
        if eps is not None:
            msg += f" at eps={eps!r}"
        super().__init__(msg)
        self.node = node
        self.rcond = rcond
        self.time = time
        self.eps = eps

    def at_eps(self, eps):
        return type(self)(self.node, self.rcond, self.time, eps)


class ZeroConditionalVariance(SingularCovariance):
    pass


class RankDeficientDesign(NumericalError):
    def __init__(self, rank, columns):
        super().__init__(
            f"regression design has rank {rank} < {columns} columns; "
            "the optimal wealth is unique but (V0, xi) is not"
        )
        self.rank = rank
        self.columns = columns


class HorizonNotOne(ModelError):
    def __init__(self, horizon):
        super().__init__(f"the constant-rate comparison is one-period only; horizon is {horizon}")
        self.horizon = horizon


class EpsilonOutOfRange(ModelError):
    def __init__(self, eps, lower, upper):
        super().__init__(f"eps={eps!r} lies outside the admissible interval ({lower:.6g}, {upper:.6g})")
        self.eps = eps
        self.lower = lower
        self.upper = upper
