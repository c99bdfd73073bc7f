"""Assembly of single-atom responses into multiple-scattering spectra.

Each scattering diagram is a small wiring graph: every atom owns one
outgoing positive-frequency (solid) and one outgoing negative-frequency
(dashed) arrow, receives up to four arrows as weak classical probes, and
the two detection arrows share the detected frequency nu.  A diagram value
is a sum over the per-atom decompositions into

* elastic terms - products of stationary dipole amplitudes, one factor per
  partition of the atom's probes between the two outgoing arrows; each
  pins its outgoing frequencies to the partition's beat frequencies;
* a fluctuation term - the two-sided dipole fluctuation density, which
  ties the two outgoing frequencies together and leaves their center free.

The frequency pins form a homogeneous linear system over the internal
arrow frequencies and nu.  Solving it exactly classifies every term as an
elastic delta(nu) weight or an inelastic density with zero, one or two
residual frequency integrals, evaluated here on adapted node sets by
tensor contraction.  One redundant constraint per connected diagram (the
overall stationarity) is discarded, which fixes the per-unit-time
normalization; remaining nonunit pivot determinants enter as Jacobians.

Spectra are computed per representative diagram of each template; the
multiplicity bookkeeping of the triple-scattering types is applied in
`combine_triple` (type two ladder enters with weight one half, type two
crossed through twice its real part).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .algebra import ObeSystem, project_lowering, project_raising
from .geometry import enumerate_allowed_indices
from .response import BlockEvaluator, ProbeSpec
from .spectral import FrequencyGrid, Nodes, SpectralComponent, adapted_nodes

DET = -1  # arrow id of the detection channel


@dataclass(frozen=True)
class AtomWiring:
    """Probe hookups (arrow id, polarization slot, frequency sign) and the
    two outgoing slots of one atom."""

    probes: tuple
    dashed_out: tuple
    solid_out: tuple


@dataclass(frozen=True)
class DiagramTemplate:
    id: str
    n_internal: int
    atoms: tuple[AtomWiring, ...]


TEMPLATES: dict[str, DiagramTemplate] = {
    # source and receiver joined by a co-propagating solid/dashed pair
    "D-ladder": DiagramTemplate(
        id="D-ladder",
        n_internal=2,
        atoms=(
            AtomWiring(probes=(), dashed_out=(1, +1), solid_out=(0, +1)),
            AtomWiring(probes=((0, -1, -1), (1, -1, +1)), dashed_out=(DET, -1), solid_out=(DET, -1)),
        ),
    ),
    # reversed-path interference: solid 0 runs C -> D, dashed 1 runs D -> C
    "D-crossed": DiagramTemplate(
        id="D-crossed",
        n_internal=2,
        atoms=(
            AtomWiring(probes=((1, -1, +1),), dashed_out=(DET, -1), solid_out=(0, +1)),
            AtomWiring(probes=((0, -1, -1),), dashed_out=(1, +1), solid_out=(DET, -1)),
        ),
    ),
    # intensity cascade a -> b -> c
    "T-ladder-1": DiagramTemplate(
        id="T-ladder-1",
        n_internal=4,
        atoms=(
            AtomWiring(probes=(), dashed_out=(1, +1), solid_out=(0, +1)),
            AtomWiring(probes=((0, "q", -1), (1, "q", +1)), dashed_out=(3, "r"), solid_out=(2, "r")),
            AtomWiring(probes=((2, -1, -1), (3, -1, +1)), dashed_out=(DET, -1), solid_out=(DET, -1)),
        ),
    ),
    # two sources both feeding the final atom
    "T-ladder-2": DiagramTemplate(
        id="T-ladder-2",
        n_internal=4,
        atoms=(
            AtomWiring(probes=(), dashed_out=(1, +1), solid_out=(0, +1)),
            AtomWiring(probes=(), dashed_out=(3, +1), solid_out=(2, +1)),
            AtomWiring(
                probes=((0, "u", -1), (1, "u", +1), (2, "v", -1), (3, "v", +1)),
                dashed_out=(DET, -1),
                solid_out=(DET, -1),
            ),
        ),
    ),
    # path a -> b -> c interfering with its reverse; dashed arrows run c -> b -> a
    "T-crossed-1": DiagramTemplate(
        id="T-crossed-1",
        n_internal=4,
        atoms=(
            AtomWiring(probes=((3, -1, +1),), dashed_out=(DET, -1), solid_out=(0, +1)),
            AtomWiring(probes=((0, "q", -1), (2, "w", +1)), dashed_out=(3, "y"), solid_out=(1, "r")),
            AtomWiring(probes=((1, -1, -1),), dashed_out=(2, +1), solid_out=(DET, -1)),
        ),
    ),
    # amplitude tree (a, b) -> hub interfering with the path b -> hub -> a
    "T-crossed-2": DiagramTemplate(
        id="T-crossed-2",
        n_internal=4,
        atoms=(
            AtomWiring(probes=((3, -1, +1),), dashed_out=(DET, -1), solid_out=(0, +1)),
            AtomWiring(probes=(), dashed_out=(2, +1), solid_out=(1, +1)),
            AtomWiring(
                probes=((0, "u", -1), (1, "v", -1), (2, "v", +1)),
                dashed_out=(3, "x"),
                solid_out=(DET, -1),
            ),
        ),
    ),
}


# --------------------------------------------------------------------------
# Exact solution of the frequency-pinning constraints
# --------------------------------------------------------------------------


def _solve_pins(rows: list[list[Fraction]], n_vars: int):
    """Row-reduce homogeneous pins over (x_0..x_{n-1}, nu).

    Returns (nu_pinned, forms, frees, jacobian): `forms[i]` expresses x_i
    as float coefficients over (*frees, nu); redundant rows are dropped
    (the overall stationarity normalization) and the absolute pivot
    determinant enters as 1/jacobian.
    """
    mat = [list(r) for r in rows]
    pivot_of_col = {}
    rank = 0
    det = Fraction(1)
    for c in range(n_vars):
        pr = None
        for i in range(rank, len(mat)):
            if mat[i][c] != 0:
                pr = i
                break
        if pr is None:
            continue
        mat[rank], mat[pr] = mat[pr], mat[rank]
        det *= mat[rank][c]
        inv = Fraction(1) / mat[rank][c]
        mat[rank] = [v * inv for v in mat[rank]]
        for i in range(len(mat)):
            if i != rank and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[rank])]
        pivot_of_col[c] = rank
        rank += 1
    nu_pinned = any(mat[i][n_vars] != 0 for i in range(rank, len(mat)))
    frees = [c for c in range(n_vars) if c not in pivot_of_col]
    forms = np.zeros((n_vars, len(frees) + 1))
    for c in range(n_vars):
        if c in pivot_of_col:
            row = mat[pivot_of_col[c]]
            for k, fc in enumerate(frees):
                forms[c, k] = -float(row[fc])
            if not nu_pinned:
                forms[c, len(frees)] = -float(row[n_vars])
        else:
            forms[c, frees.index(c)] = 1.0
    return nu_pinned, forms, frees, 1.0 / abs(float(det))


def _zeta_row(atom: AtomWiring, mask: int, n_vars: int) -> list[Fraction]:
    row = [Fraction(0)] * (n_vars + 1)
    for k, (arrow, _pol, sign) in enumerate(atom.probes):
        if mask >> k & 1:
            row[arrow] += sign
    return row


def _freq_row(arrow: int, n_vars: int) -> list[Fraction]:
    row = [Fraction(0)] * (n_vars + 1)
    row[n_vars if arrow == DET else arrow] += 1
    return row


def _sub(a, b):
    return [x - y for x, y in zip(a, b)]


# --------------------------------------------------------------------------
# Term evaluation
# --------------------------------------------------------------------------


class _Term:
    """One (assignment, per-atom mode) combination after constraint solving."""

    def __init__(self, template, pols, modes, geo, nu_pinned, forms, frees, jac):
        self.template = template
        self.pols = pols            # per-atom dict slot -> polarization value
        self.modes = modes          # per-atom ('fl',) or ('el', ka_mask)
        self.geo = geo
        self.nu_pinned = nu_pinned
        self.forms = forms          # (n_internal, n_frees + 1), last column = nu
        self.frees = frees
        self.jac = jac


class DiagramAssembler:
    """Evaluates diagram templates for one driven-atom system.

    Parameters
    ----------
    sys : ObeSystem
    nodes : quadrature nodes for intermediate-frequency integrals
        (defaults to an adapted set for the drive).
    nu_nodes : nodes used to integrate the detected frequency in totals mode
        when no analytic collapse applies.
    """

    def __init__(self, sys: ObeSystem, nodes: Nodes | None = None,
                 nu_nodes: Nodes | None = None, chunk: int = 32768,
                 max_tensor: int = 8_000_000):
        self.sys = sys
        self.nodes = nodes or adapted_nodes(sys.drive.omega, sys.drive.delta)
        self.nu_nodes = nu_nodes or self.nodes
        self.chunk = chunk
        self.max_tensor = max_tensor
        self._cache = {}

    # -- public ---------------------------------------------------------------

    def spectrum(self, template_id: str, grid: FrequencyGrid) -> SpectralComponent:
        elastic, density = self._evaluate(template_id, nu_axis=grid.samples, totals=False)
        return SpectralComponent(grid, elastic, density)

    def totals(self, template_id: str) -> tuple[complex, complex]:
        """(elastic weight, integrated inelastic) without a detection grid."""
        return self._evaluate(template_id, nu_axis=None, totals=True)

    # -- term generation --------------------------------------------------------

    def _terms(self, template_id: str):
        template = TEMPLATES[template_id]
        n = template.n_internal
        for assignment in enumerate_allowed_indices(template_id):
            idx = assignment.indices
            pols = []
            for atom in template.atoms:
                resolve = lambda p: idx[p] if isinstance(p, str) else p
                pols.append({
                    "probes": tuple(resolve(p[1]) for p in atom.probes),
                    "dashed": resolve(atom.dashed_out[1]),
                    "solid": resolve(atom.solid_out[1]),
                })
            mode_lists = []
            for atom in template.atoms:
                npr = len(atom.probes)
                mode_lists.append([("fl",)] + [("el", m) for m in range(1 << npr)])
            for modes in product(*mode_lists):
                rows = []
                for atom, mode in zip(template.atoms, modes):
                    full = (1 << len(atom.probes)) - 1
                    if mode[0] == "fl":
                        rows.append(_sub(_sub(_freq_row(atom.dashed_out[0], n),
                                              _freq_row(atom.solid_out[0], n)),
                                         _zeta_row(atom, full, n)))
                    else:
                        ka = mode[1]
                        rows.append(_sub(_freq_row(atom.dashed_out[0], n),
                                         _zeta_row(atom, ka, n)))
                        rows.append([a + b for a, b in
                                     zip(_freq_row(atom.solid_out[0], n),
                                         _zeta_row(atom, full & ~ka, n))])
                nu_pinned, forms, frees, jac = _solve_pins(rows, n)
                yield _Term(template, pols, modes, assignment.weight, nu_pinned, forms, frees, jac)

    # -- factor evaluation -------------------------------------------------------

    def _factor(self, signs, pol, mode, forms_for_atom, axes, key_extra):
        """Tensor of one atom's factor over the term axes it depends on.

        forms_for_atom: (probe_forms, eval_form) with coefficients over the
        term's axes (frees..., nu?); returns (tensor, axis_ids).
        """
        probe_forms, eval_form = forms_for_atom
        n_ax = len(axes)
        used = sorted({k for f in list(probe_forms) + ([eval_form] if eval_form is not None else [])
                       for k in range(n_ax) if abs(f[k]) > 1e-12})
        key = (mode, pol["dashed"], pol["solid"], tuple(pol["probes"]), signs,
               tuple(tuple(np.round(f, 9)) for f in probe_forms),
               tuple(np.round(eval_form, 9)) if eval_form is not None else None,
               tuple(id(axes[k]) for k in used), key_extra)
        hit = self._cache.get(key)
        if hit is not None:
            return hit, used
        shape = tuple(len(axes[k]) for k in used)

        def evaluate(arg_of):
            """arg_of maps a form to a scalar or flat array over the slab."""
            probes = [ProbeSpec(delta=arg_of(f), q=q, sign=s)
                      for f, q, s in zip(probe_forms, pol["probes"], signs)]
            ev = BlockEvaluator(self.sys, probes)
            if mode[0] == "el":
                ka = mode[1]
                kb = ev.full & ~ka
                return (project_raising(ev.correction(ka), pol["dashed"])
                        * project_lowering(ev.correction(kb), pol["solid"]))
            if mode[0] == "fl":
                return ev.fluct_density(pol["dashed"], pol["solid"], arg_of(eval_form))
            return ev.equal_time(pol["dashed"], pol["solid"])

        if len(used) <= 1:
            if not used:
                tensor = np.asarray(evaluate(lambda f: 0.0), dtype=complex).reshape(())
            else:
                ax = axes[used[0]]
                out = np.empty(len(ax), dtype=complex)
                for start in range(0, len(ax), self.chunk):
                    sl = slice(start, min(start + self.chunk, len(ax)))
                    val = evaluate(
                        lambda f, _sl=sl: f[used[0]] * ax[_sl] if abs(f[used[0]]) > 1e-12 else 0.0)
                    out[sl] = np.broadcast_to(np.asarray(val), (sl.stop - sl.start,))
                tensor = out
        else:
            # iterate the leading axis; probes varying only along it collapse
            # to scalars, which keeps the recursion caches vector-免 for them
            lead, rest = used[0], used[1:]
            grids = np.meshgrid(*(axes[k] for k in rest), indexing="ij")
            flats = [g.ravel() for g in grids]
            rest_size = flats[0].size
            out = np.empty((len(axes[lead]), rest_size), dtype=complex)
            for i0, v0 in enumerate(axes[lead]):
                def arg_of(f, _v0=v0):
                    rest_part = None
                    for local, k in enumerate(rest):
                        if abs(f[k]) > 1e-12:
                            piece = f[k] * flats[local]
                            rest_part = piece if rest_part is None else rest_part + piece
                    head = f[lead] * _v0 if abs(f[lead]) > 1e-12 else 0.0
                    if rest_part is None:
                        return head
                    return rest_part + head
                out[i0, :] = np.broadcast_to(np.asarray(evaluate(arg_of)), (rest_size,))
            tensor = out.reshape((len(axes[lead]),) + tuple(len(axes[k]) for k in rest))
        self._cache[key] = tensor
        return tensor, used

    # -- main evaluation ----------------------------------------------------------

    def _evaluate(self, template_id: str, nu_axis, totals: bool):
        template = TEMPLATES[template_id]
        elastic = 0.0 + 0.0j
        density = None if nu_axis is None else np.zeros(len(nu_axis), dtype=complex)
        inelastic_total = 0.0 + 0.0j
        for term in self._terms(template_id):
            val = self._eval_term(term, nu_axis, totals)
            if term.nu_pinned:
                elastic += val
            elif totals:
                inelastic_total += val
            else:
                density += val
        if totals:
            return elastic, inelastic_total
        return elastic, density

    def _eval_term(self, term, nu_axis, totals):
        template = term.template
        n_frees = len(term.frees)
        has_nu = not term.nu_pinned

        # forms over term axes: frees first, then nu when present
        def axis_form(form):
            f = np.zeros(n_frees + (1 if has_nu else 0))
            f[:n_frees] = form[:n_frees]
            if has_nu:
                f[n_frees] = form[n_frees]
            return f

        atom_forms = []
        nu_dep = []
        for atom, pol, mode in zip(template.atoms, term.pols, term.modes):
            probe_forms = [axis_form(term.forms[p[0]]) for p in atom.probes]
            if mode[0] == "fl":
                arrow = atom.solid_out[0]
                if arrow == DET:
                    ev_form = np.zeros(n_frees + (1 if has_nu else 0))
                    if has_nu:
                        ev_form[n_frees] = 1.0
                else:
                    ev_form = axis_form(term.forms[arrow])
            else:
                ev_form = None
            atom_forms.append((probe_forms, ev_form))
            dep = any(abs(f[n_frees]) > 1e-12 for f in probe_forms) if has_nu else False
            if has_nu and ev_form is not None and abs(ev_form[n_frees]) > 1e-12:
                dep = True
            nu_dep.append(dep)

        modes = list(term.modes)
        collapse_scale = 1.0
        drop_nu = False
        if totals and has_nu:
            dep_atoms = [i for i, d in enumerate(nu_dep) if d]
            if len(dep_atoms) == 1 and modes[dep_atoms[0]][0] == "fl":
                i = dep_atoms[0]
                pf, ef = atom_forms[i]
                if all(abs(f[n_frees]) < 1e-12 for f in pf) and abs(abs(ef[n_frees]) - 1.0) < 1e-12:
                    modes[i] = ("et",)
                    atom_forms[i] = (pf, None)
                    drop_nu = True
                    collapse_scale = 1.0  # |d nu_b / d nu| = 1

        # axes: free variables then (optionally) nu
        axes = [self.nodes.x for _ in range(n_frees)]
        weights = [self.nodes.w for _ in range(n_frees)]
        nu_label = None
        if has_nu and not drop_nu:
            if totals:
                axes.append(self.nu_nodes.x)
                weights.append(self.nu_nodes.w)
            else:
                axes.append(self._nu_axis_for_term(term, nu_axis, atom_forms))
                weights.append(None)
            nu_label = len(axes) - 1

        letters = "abcdefgh"
        operands = []
        subs = []
        for atom, pol, mode, forms in zip(template.atoms, term.pols, modes, atom_forms):
            signs = tuple(p[2] for p in atom.probes)
            tensor, used = self._factor(signs, pol, mode, forms, axes, template.id)
            operands.append(tensor)
            subs.append("".join(letters[k] for k in used))
        for k in range(len(axes)):
            if weights[k] is not None:
                operands.append(weights[k])
                subs.append(letters[k])
        out_label = letters[nu_label] if (nu_label is not None and not totals) else ""
        value = np.einsum(",".join(subs) + "->" + out_label, *operands, optimize=True)
        value = value * (term.geo * term.jac * collapse_scale)

        if term.nu_pinned or totals:
            return complex(value) if np.ndim(value) == 0 else complex(value)
        if nu_label is not None and len(axes[nu_label]) != len(nu_axis):
            coarse = axes[nu_label]
            value = np.interp(nu_axis, coarse, value.real) + 1j * np.interp(nu_axis, coarse, value.imag)
        return value

    def _nu_axis_for_term(self, term, nu_axis, atom_forms):
        """Full detection grid, decimated when a term's tensors would be huge."""
        n_frees = len(term.frees)
        if n_frees < 2:
            return nu_axis
        est = len(self.nodes) ** 2 * len(nu_axis)
        if est <= self.max_tensor:
            return nu_axis
        stride = int(np.ceil(est / self.max_tensor))
        coarse = nu_axis[::stride]
        if coarse[-1] != nu_axis[-1]:
            coarse = np.concatenate([coarse, nu_axis[-1:]])
        return coarse


# --------------------------------------------------------------------------
# Public assembly operations
# --------------------------------------------------------------------------


def _as_real(comp: SpectralComponent, label: str, tol: float = 1e-7) -> SpectralComponent:
    scale = max(abs(comp.elastic), np.max(np.abs(comp.inelastic)), 1e-300)
    resid = max(abs(np.imag(comp.elastic)), np.max(np.abs(np.imag(comp.inelastic))))
    if resid > tol * scale:
        raise AssertionError(f"{label}: imaginary residue {resid:.3e} exceeds {tol} of scale {scale:.3e}")
    return comp.real_part()


def assemble_double(sys: ObeSystem, grid: FrequencyGrid,
                    assembler: DiagramAssembler | None = None):
    """Double-scattering ladder and crossed spectra (crossed taken with its
    conjugate partner, i.e. the real part of the representative)."""
    asm = assembler or DiagramAssembler(sys)
    ladder = _as_real(asm.spectrum("D-ladder", grid), "L2")
    crossed = asm.spectrum("D-crossed", grid).real_part()
    return ladder, crossed


def assemble_triple(sys: ObeSystem, grid: FrequencyGrid,
                    assembler: DiagramAssembler | None = None):
    """Type-resolved triple-scattering components (L1, L2type, C1, C2type).

    C2type stays complex; it enters the total through 2 Re in `combine_triple`.
    """
    asm = assembler or DiagramAssembler(sys)
    l1 = _as_real(asm.spectrum("T-ladder-1", grid), "L3 type 1")
    l2 = _as_real(asm.spectrum("T-ladder-2", grid), "L3 type 2")
    c1 = asm.spectrum("T-crossed-1", grid).real_part()
    c2 = asm.spectrum("T-crossed-2", grid)
    return l1, l2, c1, c2


def combine_triple(l1: SpectralComponent, l2type: SpectralComponent,
                   c1: SpectralComponent, c2type: SpectralComponent):
    """L3 = L1 + L2/2 and C3 = C1 + 2 Re C2, applied to both spectrum parts."""
    l3 = l1 + l2type.scaled(0.5)
    c3 = c1 + SpectralComponent(c2type.grid, 2.0 * np.real(c2type.elastic),
                                2.0 * np.real(c2type.inelastic))
    return l3, c3


def double_totals(sys: ObeSystem, assembler: DiagramAssembler | None = None):
    """Integrated double-scattering quantities without a detection grid."""
    asm = assembler or DiagramAssembler(sys)
    out = {}
    for tid, name in (("D-ladder", "L2"), ("D-crossed", "C2")):
        el, inel = asm.totals(tid)
        out[f"{name}_el"] = float(np.real(el))
        out[f"{name}_in"] = float(np.real(inel))
        out[name] = float(np.real(el + inel))
    return out


def triple_totals(sys: ObeSystem, assembler: DiagramAssembler | None = None):
    """Integrated triple-scattering quantities, combined per template weights."""
    asm = assembler or DiagramAssembler(sys)
    parts = {}
    for tid, name in (("T-ladder-1", "L1"), ("T-ladder-2", "L2t"),
                      ("T-crossed-1", "C1"), ("T-crossed-2", "C2t")):
        el, inel = asm.totals(tid)
        parts[f"{name}_el"] = el
        parts[f"{name}_in"] = inel
    out = {
        "L3_el": float(np.real(parts["L1_el"] + 0.5 * parts["L2t_el"])),
        "L3_in": float(np.real(parts["L1_in"] + 0.5 * parts["L2t_in"])),
        "C3_el": float(np.real(parts["C1_el"]) + 2.0 * np.real(parts["C2t_el"])),
        "C3_in": float(np.real(parts["C1_in"]) + 2.0 * np.real(parts["C2t_in"])),
        "parts": {k: complex(v) for k, v in parts.items()},
    }
    out["L3"] = out["L3_el"] + out["L3_in"]
    out["C3"] = out["C3_el"] + out["C3_in"]
    return out
