"""Dense state-vector / density-matrix calculator for up to four qubits.

Used as the brute-force reference for the closed-form fidelity formulas in
:mod:`qnetsim.channels`. Qubit 0 is the most significant bit of the basis
index, so ``|q0 q1 ... q_{n-1}>``.
"""

from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

from .errors import BadParameter, BadTarget

MAX_QUBITS = 4
_S2 = 1.0 / np.sqrt(2.0)


class BellKind(str, enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"


GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _S2,
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
}


def _check_unitary(mat: np.ndarray) -> None:
    if not np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), atol=1e-12):
        raise BadParameter("gate matrix is not unitary")


for _m in GATES.values():
    _check_unitary(_m)


def basis_state(bits: str) -> np.ndarray:
    """Computational basis ket, e.g. ``basis_state("01")``."""
    vec = np.zeros(2 ** len(bits), dtype=complex)
    vec[int(bits, 2)] = 1.0
    return vec


def bell_state(kind: BellKind | str = BellKind.PHI_PLUS) -> np.ndarray:
    kind = BellKind(kind)
    amps = {
        BellKind.PHI_PLUS: (1, 0, 0, 1),
        BellKind.PHI_MINUS: (1, 0, 0, -1),
        BellKind.PSI_PLUS: (0, 1, 1, 0),
        BellKind.PSI_MINUS: (0, 1, -1, 0),
    }[kind]
    return np.array(amps, dtype=complex) * _S2


def projector(state: np.ndarray) -> np.ndarray:
    return np.outer(state, state.conj())


def n_qubits(obj: np.ndarray) -> int:
    dim = obj.shape[0]
    n = int(round(np.log2(dim)))
    if 2**n != dim or n > MAX_QUBITS or n < 1:
        raise BadTarget(f"unsupported register dimension {dim}")
    return n


def is_density_matrix(obj: np.ndarray) -> bool:
    return obj.ndim == 2


def check_state(obj: np.ndarray, atol: float = 1e-12) -> None:
    """Raise ``BadParameter`` unless ``obj`` is a valid pure state or density matrix."""
    if obj.ndim == 1:
        if abs(np.vdot(obj, obj).real - 1.0) > atol:
            raise BadParameter("state vector is not normalized")
        return
    if not np.allclose(obj, obj.conj().T, atol=atol):
        raise BadParameter("density matrix is not Hermitian")
    if abs(np.trace(obj).real - 1.0) > atol:
        raise BadParameter("density matrix trace differs from 1")
    if np.linalg.eigvalsh(obj).min() < -1e-10:
        raise BadParameter("density matrix is not positive semidefinite")


def _check_targets(targets: Sequence[int], n: int) -> None:
    if len(set(targets)) != len(targets):
        raise BadTarget(f"repeated targets {tuple(targets)}")
    for t in targets:
        if not 0 <= t < n:
            raise BadTarget(f"target {t} outside {n}-qubit register")


def _apply_left(op: np.ndarray, tensor: np.ndarray, targets: Sequence[int], n: int, offset: int = 0) -> np.ndarray:
    """Contract ``op`` (2^k x 2^k) into the qubit axes ``targets`` of ``tensor``."""
    k = len(targets)
    op_t = op.reshape([2] * (2 * k))
    axes = [offset + t for t in targets]
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the new axes first; move them back into place
    return np.moveaxis(out, list(range(k)), axes)


def apply_unitary(state: np.ndarray, unitary: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    n = n_qubits(state)
    targets = list(targets)
    _check_targets(targets, n)
    if unitary.shape != (2 ** len(targets),) * 2:
        raise BadTarget("gate arity does not match number of targets")
    if state.ndim == 1:
        t = state.reshape([2] * n)
        return _apply_left(unitary, t, targets, n).reshape(-1)
    t = state.reshape([2] * (2 * n))
    t = _apply_left(unitary, t, targets, n)
    t = _apply_left(unitary.conj(), t, targets, n, offset=n)
    return t.reshape(2**n, 2**n)


def apply_gate(state: np.ndarray, name: str, targets: Sequence[int] | int) -> np.ndarray:
    """Apply a named gate from :data:`GATES`; works on kets and density matrices."""
    if isinstance(targets, (int, np.integer)):
        targets = [int(targets)]
    try:
        mat = GATES[name]
    except KeyError:
        raise BadParameter(f"unknown gate {name!r}") from None
    return apply_unitary(state, mat, targets)


def kraus_operators(kind: str, param: float) -> list[np.ndarray]:
    """Single-qubit Kraus operators for ``depolarizing``, ``amplitude_damping`` or ``phase_damping``."""
    if not 0.0 <= param <= 1.0:
        raise BadParameter(f"channel parameter {param!r} outside [0, 1]")
    kind = kind.lower()
    if kind == "depolarizing":
        # rho -> (1-p) rho + p I/2
        ops = [np.sqrt(1 - 3 * param / 4) * GATES["I"]]
        ops += [np.sqrt(param / 4) * GATES[g] for g in ("X", "Y", "Z")]
    elif kind == "amplitude_damping":
        ops = [
            np.array([[1, 0], [0, np.sqrt(1 - param)]], dtype=complex),
            np.array([[0, np.sqrt(param)], [0, 0]], dtype=complex),
        ]
    elif kind == "phase_damping":
        ops = [
            np.array([[1, 0], [0, np.sqrt(1 - param)]], dtype=complex),
            np.array([[0, 0], [0, np.sqrt(param)]], dtype=complex),
        ]
    else:
        raise BadParameter(f"unknown channel {kind!r}")
    total = sum(k.conj().T @ k for k in ops)
    if not np.allclose(total, np.eye(2), atol=1e-12):
        raise BadParameter("Kraus operators are not trace preserving")
    return ops


def to_density(state: np.ndarray) -> np.ndarray:
    return projector(state) if state.ndim == 1 else state


def apply_channel(rho: np.ndarray, kind: str, param: float, target: int) -> np.ndarray:
    rho = to_density(rho)
    n = n_qubits(rho)
    _check_targets([target], n)
    out = np.zeros_like(rho)
    for k in kraus_operators(kind, param):
        t = rho.reshape([2] * (2 * n))
        t = _apply_left(k, t, [target], n)
        t = _apply_left(k.conj(), t, [target], n, offset=n)
        out = out + t.reshape(rho.shape)
    return out


def partial_trace(rho: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix on the qubits ``keep`` (in the given order)."""
    n = n_qubits(rho)
    keep = list(keep)
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape([2] * (2 * n))
    letters = "abcdefghijklmnop"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for q in drop:
        col[q] = row[q]
    out = "".join(row[q] for q in keep) + "".join(col[q] for q in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dim = 2 ** len(keep)
    return reduced.reshape(dim, dim)


def tensor(*parts: np.ndarray) -> np.ndarray:
    out = parts[0]
    for p in parts[1:]:
        out = np.kron(out, p)
    return out


def fidelity_to_bell(rho: np.ndarray, kind: BellKind | str = BellKind.PHI_PLUS) -> float:
    rho = to_density(rho)
    if rho.shape != (4, 4):
        raise BadTarget("fidelity_to_bell expects a two-qubit state")
    b = bell_state(kind)
    return float(np.real(b.conj() @ rho @ b))


def werner(fidelity: float) -> np.ndarray:
    """``F |Phi+><Phi+| + (1-F)/3`` times the sum of the other three Bell projectors."""
    if not 0.25 - 1e-15 <= fidelity <= 1.0 + 1e-15:
        raise BadParameter(f"Werner fidelity {fidelity!r} outside [1/4, 1]")
    rest = (1.0 - fidelity) / 3.0
    rho = fidelity * projector(bell_state(BellKind.PHI_PLUS))
    for kind in (BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS):
        rho = rho + rest * projector(bell_state(kind))
    return rho


# Bell outcome (a, b) -> basis state measured on (q1, q2) after the
# disentangling CNOT(q1->q2), H(q1): q1 carries b (Z correction), q2 carries a (X correction).
def _bell_for_bits(a: int, b: int) -> np.ndarray:
    ket = basis_state(f"{b}{a}")
    # invert H(q1) then CNOT
    ket = apply_gate(ket, "H", 0)
    return apply_gate(ket, "CNOT", [0, 1])


def bsm_project(rho: np.ndarray, q1: int, q2: int, a: int, b: int) -> tuple[float, np.ndarray | None]:
    """Project ``(q1, q2)`` onto the Bell outcome ``(a, b)``.

    Returns the Born probability and the normalized state of the remaining
    qubits (``None`` if the outcome has zero probability).
    """
    rho = to_density(rho)
    n = n_qubits(rho)
    if q1 == q2:
        raise BadTarget("Bell measurement needs two distinct qubits")
    _check_targets([q1, q2], n)
    bell = _bell_for_bits(a, b)
    t = rho.reshape([2] * (2 * n))
    # contract <bell| on rows and |bell> on columns of the measured qubits
    letters = "abcdefghijklmnop"
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    bra = bell.conj().reshape(2, 2)
    ket = bell.reshape(2, 2)
    rest = [q for q in range(n) if q != q1 and q != q2]
    out = "".join(row[q] for q in rest) + "".join(col[q] for q in rest)
    expr = f"{row[q1]}{row[q2]},{''.join(row)}{''.join(col)},{col[q1]}{col[q2]}->{out}"
    post = np.einsum(expr, bra, t, ket)
    dim = 2 ** len(rest)
    post = post.reshape(dim, dim)
    prob = float(np.real(np.trace(post)))
    if prob <= 1e-15:
        return 0.0, None
    return prob, post / prob


def bsm(rho: np.ndarray, q1: int, q2: int, rng: np.random.Generator) -> tuple[tuple[int, int], np.ndarray]:
    """Born-rule sampled Bell-state measurement.

    Outcome probabilities are computed exactly and a single uniform draw
    selects one. Returns ``((a, b), post_state)`` where the remaining qubits
    keep their relative order.
    """
    outcomes = [(a, b) for b in (0, 1) for a in (0, 1)]
    results = [bsm_project(rho, q1, q2, a, b) for a, b in outcomes]
    u = rng.random()
    acc = 0.0
    last = None
    for (a, b), (p, post) in zip(outcomes, results):
        if p <= 0.0:
            continue
        last = ((a, b), post)
        acc += p
        if u < acc:
            return (a, b), post
    return last  # guards against rounding leaving u >= sum(p)


def pauli_correction(state: np.ndarray, a: int, b: int, target: int) -> np.ndarray:
    """Apply ``Z^b X^a`` (X first) to ``target``."""
    if a:
        state = apply_gate(state, "X", target)
    if b:
        state = apply_gate(state, "Z", target)
    return state


def teleport(psi: np.ndarray, a: int, b: int) -> tuple[float, np.ndarray]:
    """Teleport a single-qubit ket through ``|Phi+>`` conditioned on outcome ``(a, b)``.

    Qubit 0 holds ``psi``, qubits 1-2 the shared pair. Returns the outcome
    probability and the corrected output density matrix on the receiver.
    """
    rho = projector(np.kron(psi, bell_state(BellKind.PHI_PLUS)))
    p, post = bsm_project(rho, 0, 1, a, b)
    return p, pauli_correction(post, a, b, 0)


def swap_circuit(rho_left: np.ndarray, rho_right: np.ndarray, a: int, b: int,
                 gate_depol: float = 0.0) -> tuple[float, np.ndarray | None]:
    """Entanglement swap of pairs (A, M1) and (M2, B) for BSM outcome ``(a, b)`` on (M1, M2).

    The correction is applied at B and an optional depolarizing channel
    models imperfect local operations. Returns the outcome probability and
    the (A, B) state.
    """
    rho = np.kron(to_density(rho_left), to_density(rho_right))
    p, post = bsm_project(rho, 1, 2, a, b)
    if post is None:
        return 0.0, None
    post = pauli_correction(post, a, b, 1)
    if gate_depol > 0.0:
        post = apply_channel(post, "depolarizing", gate_depol, 1)
    return p, post


def swap_oracle(f1: float, f2: float, gate_depol: float = 0.0) -> float:
    """Outcome-averaged Bell fidelity after swapping two Werner pairs."""
    total = 0.0
    for a in (0, 1):
        for b in (0, 1):
            p, post = swap_circuit(werner(f1), werner(f2), a, b, gate_depol)
            if post is not None:
                total += p * fidelity_to_bell(post)
    return total


def purify_oracle(f1: float, f2: float) -> tuple[float, float]:
    """BBPSSW round on ``werner(f1) (x) werner(f2)`` as a four-qubit density matrix.

    Qubit order is (A1, B1, A2, B2). Bilateral CNOTs A1->A2 and B1->B2 are
    followed by Z measurements of A2 and B2; the round succeeds when the two
    bits agree. Returns ``(p_success, output fidelity of (A1, B1))``.
    """
    rho = np.kron(werner(f1), werner(f2))
    rho = apply_gate(rho, "CNOT", [0, 2])
    rho = apply_gate(rho, "CNOT", [1, 3])
    kept = np.zeros((4, 4), dtype=complex)
    t = rho.reshape([2] * 8)
    for bit in (0, 1):
        # select A2 = B2 = bit on both row and column indices
        sub = t[:, :, bit, bit, :, :, bit, bit]
        kept = kept + sub.reshape(4, 4)
    p = float(np.real(np.trace(kept)))
    if p <= 0.0:
        return 0.0, 0.0
    return p, fidelity_to_bell(kept / p)


def zz_error_rate(rho: np.ndarray) -> float:
    """Probability that Z-basis measurements of both qubits disagree."""
    rho = to_density(rho)
    diag = np.real(np.diag(rho))
    return float(diag[1] + diag[2])


def depolarize_half_fidelity(fidelity: float, p: float) -> float:
    """Fidelity after depolarizing one half of ``werner(fidelity)``."""
    return fidelity_to_bell(apply_channel(werner(fidelity), "depolarizing", p, 1))
