"""Finite-dimensional models of operator-valued probability spaces.

The ambient algebra is M_d(C).  A context bundles a state (density matrix),
a distinguished *-subalgebra B with an explicit basis, and a conditional
expectation onto B supplied as a linear map acting on row-major vectorized
matrices.  Expectations are verified against the axioms, never derived.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9

# memory guard for vectorized moment tensors (number of index tuples)
MAX_TENSOR_TUPLES = 2_000_000


def as_matrix(a, dim=None, name="matrix"):
    """Validate and return a square complex matrix with finite entries."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} must be {dim}x{dim}, got {arr.shape[0]}x{arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def frobenius(a):
    return float(np.linalg.norm(a))


class State:
    """State on M_d given by a density matrix: phi(a) = tr(rho a)."""

    __slots__ = ("dim", "density")

    def __init__(self, density):
        rho = as_matrix(density, name="density")
        self.dim = rho.shape[0]
        self.density = rho

    def value(self, a):
        return complex(np.trace(self.density @ a))

    def residuals(self):
        herm = frobenius(self.density - self.density.conj().T)
        trace = abs(complex(np.trace(self.density)) - 1.0)
        eigs = np.linalg.eigvalsh((self.density + self.density.conj().T) / 2)
        return {
            "state_hermitian": herm,
            "state_trace": float(trace),
            "state_negativity": float(max(0.0, -eigs.min())),
        }


def normalized_trace_state(dim):
    return State(np.eye(dim) / dim)


class SubalgebraWithExpectation:
    """A subalgebra B of M_d with basis plus a conditional expectation onto B.

    The expectation is given as a (d^2 x d^2) matrix acting on vec(a) in
    row-major order.  The basis must span the identity.
    """

    __slots__ = ("dim", "b_basis", "e_map", "_span")

    def __init__(self, b_basis, e_map):
        basis = [as_matrix(b, name="basis element") for b in b_basis]
        if not basis:
            raise ValueError("b_basis must be nonempty")
        dim = basis[0].shape[0]
        basis = [as_matrix(b, dim, "basis element") for b in basis]
        emap = np.asarray(e_map, dtype=complex)
        if emap.shape != (dim * dim, dim * dim):
            raise ValueError(
                f"e_map must have shape ({dim * dim}, {dim * dim}), got {emap.shape}"
            )
        self.dim = dim
        self.b_basis = basis
        self.e_map = emap
        self._span = np.stack([b.reshape(-1) for b in basis], axis=1)
        if self.distance_to_span(np.eye(dim)) > 1e-9:
            raise ValueError("the identity must lie in the span of b_basis")

    def expect(self, a):
        a = as_matrix(a, self.dim)
        return (self.e_map @ a.reshape(-1)).reshape(self.dim, self.dim)

    def expect_all(self, stack):
        """Apply E to a stacked array of matrices with shape (..., d, d)."""
        arr = np.asarray(stack, dtype=complex)
        lead = arr.shape[:-2]
        flat = arr.reshape(-1, self.dim * self.dim)
        out = flat @ self.e_map.T
        return out.reshape(lead + (self.dim, self.dim))

    def distance_to_span(self, a):
        v = np.asarray(a, dtype=complex).reshape(-1)
        coef, *_ = np.linalg.lstsq(self._span, v, rcond=None)
        return frobenius(v - self._span @ coef)

    def contains(self, a, tol=DEFAULT_TOL):
        return self.distance_to_span(a) <= tol

    def random_element(self, rng):
        coef = rng.standard_normal(len(self.b_basis)) + 1j * rng.standard_normal(
            len(self.b_basis)
        )
        return sum(c * b for c, b in zip(coef, self.b_basis))

    def is_commutative(self, tol=DEFAULT_TOL):
        return all(
            frobenius(a @ b - b @ a) <= tol
            for a, b in itertools.combinations_with_replacement(self.b_basis, 2)
        )


def scalar_subalgebra(density):
    """B = C*1 with E[a] = tr(rho a) * 1."""
    rho = as_matrix(density, name="density")
    d = rho.shape[0]
    e_map = np.outer(np.eye(d).reshape(-1), rho.T.reshape(-1))
    return SubalgebraWithExpectation([np.eye(d)], e_map)


def pinching_subalgebra(blocks):
    """Block-diagonal subalgebra with E[a] = sum_t P_t a P_t.

    blocks partition the coordinate set {0..d-1}; P_t projects onto the
    coordinates of block t.
    """
    flat = sorted(x for b in blocks for x in b)
    d = len(flat)
    if flat != list(range(d)):
        raise ValueError(f"blocks must partition 0..d-1, got {blocks}")
    basis = []
    e_map = np.zeros((d * d, d * d), dtype=complex)
    for block in blocks:
        proj = np.zeros((d, d), dtype=complex)
        for x in block:
            proj[x, x] = 1.0
        e_map += np.kron(proj, proj)
        for x in block:
            for y in block:
                unit = np.zeros((d, d), dtype=complex)
                unit[x, y] = 1.0
                basis.append(unit)
    return SubalgebraWithExpectation(basis, e_map)


class AlgebraContext:
    """Operator-valued probability space: ambient M_d, state phi, and (B, E)."""

    __slots__ = ("dim", "state", "subalgebra")

    def __init__(self, state, subalgebra):
        if state.dim != subalgebra.dim:
            raise ValueError(
                f"state dimension {state.dim} != subalgebra dimension {subalgebra.dim}"
            )
        self.dim = state.dim
        self.state = state
        self.subalgebra = subalgebra

    def phi(self, a):
        return self.state.value(a)

    def expect(self, a):
        return self.subalgebra.expect(a)


def scalar_context(density):
    """Scalar amalgamation: B = C*1, E = phi(.) * 1."""
    return AlgebraContext(State(density), scalar_subalgebra(density))


def pinching_context(blocks, density=None):
    """Pinching onto a block-diagonal subalgebra; default state is the normalized trace."""
    flat = sorted(x for b in blocks for x in b)
    dim = len(flat)
    state = normalized_trace_state(dim) if density is None else State(density)
    return AlgebraContext(state, pinching_subalgebra(blocks))


@dataclass
class ContextReport:
    """Axiom residuals for an AlgebraContext."""

    residuals: dict
    tolerance: float
    samples: int

    @property
    def max_residual(self):
        return max(self.residuals.values())

    @property
    def passed(self):
        return self.max_residual <= self.tolerance

    def summary(self):
        lines = [f"context check (tol={self.tolerance:g}, samples={self.samples})"]
        for name, value in self.residuals.items():
            mark = "ok" if value <= self.tolerance else "FAIL"
            lines.append(f"  {name:<24s} {value:.3e}  {mark}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _matrix_units(dim):
    for x in range(dim):
        for y in range(dim):
            unit = np.zeros((dim, dim), dtype=complex)
            unit[x, y] = 1.0
            yield unit


def verify_context(ctx, samples=20, tol=DEFAULT_TOL, seed=0):
    """Check the conditional-expectation axioms and state compatibility.

    Failures show up as report entries, never exceptions; positivity is
    only spot-checked on sampled elements of the form a*a.
    """
    rng = np.random.default_rng(seed)
    sub = ctx.subalgebra
    d = ctx.dim
    res = dict(ctx.state.residuals())

    res["expectation_unital"] = frobenius(sub.expect(np.eye(d)) - np.eye(d))
    res["expectation_fixes_b"] = max(
        frobenius(sub.expect(b) - b) for b in sub.b_basis
    )
    res["expectation_range"] = max(
        sub.distance_to_span(sub.expect(unit)) for unit in _matrix_units(d)
    )

    bimodule = 0.0
    positivity = 0.0
    for _ in range(samples):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        b1 = sub.random_element(rng)
        b2 = sub.random_element(rng)
        bimodule = max(
            bimodule, frobenius(sub.expect(b1 @ a @ b2) - b1 @ sub.expect(a) @ b2)
        )
        pos = sub.expect(a.conj().T @ a)
        herm = frobenius(pos - pos.conj().T)
        eigs = np.linalg.eigvalsh((pos + pos.conj().T) / 2)
        positivity = max(positivity, herm, max(0.0, -float(eigs.min())))
    res["bimodule"] = bimodule
    res["positivity_spot"] = positivity

    res["state_compatibility"] = max(
        abs(ctx.phi(sub.expect(unit)) - ctx.phi(unit)) for unit in _matrix_units(d)
    )
    return ContextReport(residuals=res, tolerance=tol, samples=samples)


class BPolynomial:
    """Polynomial in one formal variable X with coefficients in B.

    Each word (b0, b1, ..., bn) stands for b0*X*b1*X*...*X*bn; a word of
    length one is a constant.  Coefficients may be validated against a
    subalgebra at construction time.
    """

    __slots__ = ("dim", "words")

    def __init__(self, words, subalgebra=None):
        words = tuple(
            tuple(as_matrix(c, name="coefficient") for c in w) for w in words
        )
        if not words or any(not w for w in words):
            raise ValueError("polynomial needs at least one nonempty word")
        dim = words[0][0].shape[0]
        for w in words:
            for c in w:
                if c.shape[0] != dim:
                    raise ValueError("all coefficients must share one dimension")
        if subalgebra is not None:
            if subalgebra.dim != dim:
                raise ValueError("coefficient dimension does not match subalgebra")
            for w in words:
                for c in w:
                    if not subalgebra.contains(c):
                        raise ValueError("coefficient outside the span of b_basis")
        self.dim = dim
        self.words = words

    @property
    def degree(self):
        return max(len(w) - 1 for w in self.words)

    @staticmethod
    def variable(dim):
        """The polynomial 1*X*1."""
        return BPolynomial([(np.eye(dim), np.eye(dim))])

    @staticmethod
    def constant(b):
        return BPolynomial([(b,)])


def eval_polynomial(p, a):
    """Substitute the matrix a for X and sum the words."""
    a = as_matrix(a, p.dim, "argument")
    total = np.zeros((p.dim, p.dim), dtype=complex)
    for w in p.words:
        acc = w[0]
        for c in w[1:]:
            acc = acc @ a @ c
        total = total + acc
    return total


class MomentFunctional:
    """Oracle for B-valued moments of a family of noncommutative variables.

    Words are decorated: moment((i1,...,in), (b0,...,bn)) is the expectation
    of b0 x_{i1} b1 ... x_{in} bn.  The empty word returns b0.
    """

    b_dim = None
    variable_count = None

    def moment(self, variables, coeffs=None):
        raise NotImplementedError

    def scalar_moment(self, variables):
        raise NotImplementedError

    def identity_coeff(self):
        return np.eye(self.b_dim, dtype=complex)

    def random_coeff(self, rng):
        raise NotImplementedError

    def _check_word(self, variables, coeffs):
        variables = tuple(int(v) for v in variables)
        if self.variable_count is not None:
            for v in variables:
                if not 1 <= v <= self.variable_count:
                    raise ValueError(
                        f"variable index {v} outside 1..{self.variable_count}"
                    )
        if coeffs is not None:
            coeffs = tuple(as_matrix(c, self.b_dim, "coefficient") for c in coeffs)
            if len(coeffs) != len(variables) + 1:
                raise ValueError(
                    f"word of length {len(variables)} needs {len(variables) + 1} "
                    f"coefficients, got {len(coeffs)}"
                )
        return variables, coeffs

    def _all_tuples(self, k, n):
        if k ** n > MAX_TENSOR_TUPLES:
            raise ValueError(f"moment tensor with {k}^{n} entries is too large")
        return itertools.product(range(1, k + 1), repeat=n)

    def scalar_moment_tensor(self, k, n):
        """phi(x_{j1}...x_{jn}) for every tuple j in {1..k}^n, C-ordered."""
        values = [self.scalar_moment(t) for t in self._all_tuples(k, n)]
        return np.array(values, dtype=complex).reshape((k,) * n)

    def expectation_tensor(self, k, n, decorations=None):
        """E[x_{j1} d1 x_{j2} ... d_{n-1} x_{jn}] for every tuple, C-ordered.

        decorations are the n-1 inner coefficients; identity by default.
        """
        if decorations is None:
            decorations = [self.identity_coeff()] * (n - 1)
        if len(decorations) != n - 1:
            raise ValueError(f"need {n - 1} inner decorations, got {len(decorations)}")
        eye = self.identity_coeff()
        coeffs = (eye, *decorations, eye)
        values = [self.moment(t, coeffs) for t in self._all_tuples(k, n)]
        return np.array(values, dtype=complex).reshape((k,) * n + (self.b_dim, self.b_dim))


class ConcreteMomentFunctional(MomentFunctional):
    """Moments of explicit matrices inside an AlgebraContext."""

    def __init__(self, context, elements):
        self.context = context
        self.elements = [
            as_matrix(x, context.dim, f"element {i + 1}") for i, x in enumerate(elements)
        ]
        if not self.elements:
            raise ValueError("need at least one element")
        self.b_dim = context.dim
        self.variable_count = len(self.elements)

    def _x(self, v):
        return self.elements[v - 1]

    def _word_matrix(self, variables, coeffs):
        d = self.context.dim
        acc = np.eye(d, dtype=complex) if coeffs is None else coeffs[0]
        for pos, v in enumerate(variables):
            acc = acc @ self._x(v)
            if coeffs is not None:
                acc = acc @ coeffs[pos + 1]
        return acc

    def moment(self, variables, coeffs=None):
        variables, coeffs = self._check_word(variables, coeffs)
        if not variables:
            return coeffs[0] if coeffs is not None else self.identity_coeff()
        return self.context.expect(self._word_matrix(variables, coeffs))

    def scalar_moment(self, variables):
        variables, _ = self._check_word(variables, None)
        if not variables:
            return 1.0 + 0j
        return self.context.phi(self._word_matrix(variables, None))

    def random_coeff(self, rng):
        return self.context.subalgebra.random_element(rng)

    def _product_stack(self, k, n, decorations=None):
        # T[j1..jm] = x_{j1} d1 x_{j2} ... x_{jm}, grown one position at a time
        if self.variable_count is not None and k > self.variable_count:
            raise ValueError(
                f"requested k={k} exceeds the {self.variable_count} available variables"
            )
        if k ** n > MAX_TENSOR_TUPLES:
            raise ValueError(f"moment tensor with {k}^{n} entries is too large")
        d = self.context.dim
        xs = np.stack(self.elements[:k])
        stack = xs.copy()
        for pos in range(1, n):
            step = xs if decorations is None else np.einsum(
                "ab,jbc->jac", decorations[pos - 1], xs
            )
            stack = np.einsum("Xab,jbc->Xjac", stack.reshape(-1, d, d), step)
        return stack.reshape((k,) * n + (d, d))

    def scalar_moment_tensor(self, k, n):
        stack = self._product_stack(k, n)
        flat = stack.reshape(-1, self.context.dim, self.context.dim)
        vals = np.einsum("ab,Xba->X", self.context.state.density, flat)
        return vals.reshape((k,) * n)

    def expectation_tensor(self, k, n, decorations=None):
        if decorations is not None:
            if len(decorations) != n - 1:
                raise ValueError(
                    f"need {n - 1} inner decorations, got {len(decorations)}"
                )
            decorations = [as_matrix(b, self.context.dim) for b in decorations]
        stack = self._product_stack(k, n, decorations)
        return self.context.subalgebra.expect_all(stack)


def center(p, i, mf):
    """Subtract the constant E[p(x_i)], producing a polynomial with zero mean."""
    if p.dim != mf.b_dim:
        raise ValueError(
            f"polynomial coefficients are {p.dim}x{p.dim} but the functional "
            f"expects {mf.b_dim}x{mf.b_dim}"
        )
    mean = np.zeros((p.dim, p.dim), dtype=complex)
    for w in p.words:
        mean = mean + mf.moment((i,) * (len(w) - 1), w)
    return BPolynomial(p.words + ((-mean,),))


def expand_product(polys, variables):
    """Expand p_1(x_{v1}) ... p_n(x_{vn}) into decorated words.

    Returns a list of (variables, coeffs) pairs; boundary coefficients of
    adjacent factors are multiplied together, so degree-zero words simply
    merge into their neighbours.
    """
    polys = list(polys)
    variables = list(variables)
    if len(polys) != len(variables):
        raise ValueError("need one variable index per polynomial")
    if not polys:
        raise ValueError("empty product")
    dim = polys[0].dim
    out = []
    for combo in itertools.product(*[p.words for p in polys]):
        vars_out = []
        coeffs_out = [np.eye(dim, dtype=complex)]
        for which, w in enumerate(combo):
            coeffs_out[-1] = coeffs_out[-1] @ w[0]
            for c in w[1:]:
                vars_out.append(variables[which])
                coeffs_out.append(c)
        out.append((tuple(vars_out), tuple(coeffs_out)))
    return out


def product_expectation(mf, polys, variables):
    """E[p_1(x_{v1}) ... p_n(x_{vn})] computed through decorated words."""
    total = np.zeros((mf.b_dim, mf.b_dim), dtype=complex)
    for vars_out, coeffs_out in expand_product(polys, variables):
        total = total + mf.moment(vars_out, coeffs_out)
    return total
