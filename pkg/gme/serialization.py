"""
Problem files.

A problem file is line-oriented text:

    # comment
    mu = 2.0
    loss = poisson                 # quadratic | poisson | clipped
    observation = 4, 9, 12
    intervals.lo = 5, 5, 5         # extrapolation intervals (optional)
    intervals.hi = 40, 40, 40
    tail = zero
    regularizer = l1
    forward = identity 3
    analysis = first_difference 3
    gme_matrix = design_scalar 0.99
    constraint_map = identity 3
    constraint.lo = 5
    constraint.hi = 40

Operators are ``<kind> <args>``: ``identity n``, ``zero n [m]``,
``first_difference n``, ``dct n``, or ``dense`` / ``diagonal`` whose entries
follow in a block

    begin <name> <rows> <cols>
    1, 0, 0
    ...
    end

The GME matrix may also be ``design_scalar <theta>`` or
``design_inverse <theta>``, designed when the file is loaded. Bound lists
accept ``inf`` and ``-inf``; a single value is broadcast.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple
import io
import logging

import numpy as np

from . import linops
from .exceptions import ConfigError, GmeError
from .extrapolate import ExtrapolationTail, build_extrapolated, relative_strong_convexity_weights
from .gme_model import GmeProblem, assemble_problem, design_B_inverse, design_B_scalar
from .losses import clipped_loss, poisson_loss, quadratic_loss
from .proxfns import intervals, l1_norm

logger = logging.getLogger(__name__)

PROBLEM_KEYS = (
    'mu', 'loss', 'observation', 'clip_level', 'noise_scale',
    'intervals.lo', 'intervals.hi', 'tail', 'regularizer',
    'forward', 'analysis', 'gme_matrix', 'constraint_map',
    'constraint.lo', 'constraint.hi', 'weights',
)


@dataclass
class KeyValueDocument:
    """Parsed ``key = value`` text: values with their line numbers, plus dense blocks."""
    values: Dict[str, Tuple[str, int]] = field(default_factory=dict)
    blocks: Dict[str, np.ndarray] = field(default_factory=dict)

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.values[key][0] if key in self.values else default

    def require(self, key: str) -> str:
        if key not in self.values:
            raise ConfigError(f"Missing required key '{key}'")
        return self.values[key][0]

    def line_of(self, key: str) -> int:
        return self.values[key][1] if key in self.values else 0


def parse_key_values(text: str, allowed: Optional[Tuple[str, ...]] = None) -> KeyValueDocument:
    """
    Parse ``key = value`` lines with ``#`` comments and ``begin``/``end`` blocks.

    Raises:
        ConfigError: naming the line number of an unknown key or malformed line
    """
    doc = KeyValueDocument()
    block_name, block_shape, block_rows, block_start = None, None, [], 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue

        if block_name is not None:
            if line == 'end':
                rows = np.array(block_rows, dtype=float).reshape(-1, block_shape[1]) if block_rows else np.empty((0, block_shape[1]))
                if rows.shape != block_shape:
                    raise ConfigError(
                        f"Line {block_start}: block '{block_name}' declares shape {block_shape}, got {rows.shape}"
                    )
                doc.blocks[block_name] = rows
                block_name, block_rows = None, []
                continue
            try:
                block_rows.append([float(v) for v in line.split(',')])
            except ValueError as exc:
                raise ConfigError(f"Line {lineno}: malformed matrix row '{line}'") from exc
            if len(block_rows[-1]) != block_shape[1]:
                raise ConfigError(f"Line {lineno}: expected {block_shape[1]} entries, got {len(block_rows[-1])}")
            continue

        if line.startswith('begin'):
            parts = line.split()
            if len(parts) != 4:
                raise ConfigError(f"Line {lineno}: expected 'begin <name> <rows> <cols>'")
            try:
                block_shape = (int(parts[2]), int(parts[3]))
            except ValueError as exc:
                raise ConfigError(f"Line {lineno}: block dimensions must be integers") from exc
            block_name, block_start = parts[1], lineno
            continue

        if '=' not in line:
            raise ConfigError(f"Line {lineno}: expected 'key = value', got '{line}'")
        key, value = (s.strip() for s in line.split('=', 1))
        if allowed is not None and key not in allowed:
            raise ConfigError(f"Line {lineno}: unknown key '{key}'")
        doc.values[key] = (value, lineno)

    if block_name is not None:
        raise ConfigError(f"Line {block_start}: block '{block_name}' is never closed with 'end'")
    return doc


def parse_float_list(value: str, key: str = '', lineno: int = 0) -> List[float]:
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"Line {lineno}: '{key}' expects comma-separated numbers, got '{value}'") from exc


def _float(doc: KeyValueDocument, key: str) -> float:
    values = parse_float_list(doc.require(key), key, doc.line_of(key))
    if len(values) != 1:
        raise ConfigError(f"Line {doc.line_of(key)}: '{key}' expects a single number")
    return values[0]


def _vector(doc: KeyValueDocument, key: str, dim: Optional[int] = None) -> np.ndarray:
    values = np.array(parse_float_list(doc.require(key), key, doc.line_of(key)))
    if dim is not None:
        if values.size == 1:
            values = np.full(dim, values[0])
        elif values.size != dim:
            raise ConfigError(f"Line {doc.line_of(key)}: '{key}' needs 1 or {dim} values, got {values.size}")
    return values


def _operator(doc: KeyValueDocument, key: str) -> linops.LinearMap:
    spec = doc.require(key).split()
    kind, args = spec[0], spec[1:]
    lineno = doc.line_of(key)
    if kind in ('dense', 'diagonal'):
        if key not in doc.blocks:
            raise ConfigError(f"Line {lineno}: '{key} = {kind}' needs a 'begin {key} ...' block")
        M = doc.blocks[key]
        return linops.dense(M) if kind == 'dense' else linops.diagonal(M.ravel())
    try:
        sizes = [int(a) for a in args]
        if kind == 'identity':
            return linops.identity(*sizes)
        if kind == 'zero':
            return linops.zero(*sizes)
        if kind == 'first_difference':
            return linops.first_difference(*sizes)
        if kind == 'dct':
            return linops.dct(*sizes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Line {lineno}: malformed operator '{doc.require(key)}'") from exc
    raise ConfigError(f"Line {lineno}: unknown operator kind '{kind}'")


def problem_from_text(text: str) -> GmeProblem:
    """
    Build an (uncertified) problem from problem-file text.

    Raises:
        ConfigError: on unknown keys or malformed values
        GmeError: from the underlying constructors
    """
    doc = parse_key_values(text, allowed=PROBLEM_KEYS)
    y = _vector(doc, 'observation')
    n = y.size

    loss_kind = doc.get('loss', 'quadratic')
    if loss_kind == 'quadratic':
        base = quadratic_loss(y)
    elif loss_kind == 'poisson':
        base = poisson_loss(y)
    elif loss_kind == 'clipped':
        base = clipped_loss(y, _float(doc, 'clip_level'), _float(doc, 'noise_scale'))
    else:
        raise ConfigError(f"Line {doc.line_of('loss')}: unknown loss '{loss_kind}'")

    box = None
    if 'intervals.lo' in doc.values or 'intervals.hi' in doc.values:
        box = intervals(_vector(doc, 'intervals.lo', n), _vector(doc, 'intervals.hi', n))
        loss = build_extrapolated(base, box, ExtrapolationTail(doc.get('tail', 'zero')))
    else:
        loss = base

    if 'weights' in doc.values:
        weights = _vector(doc, 'weights', n)
    else:
        weights = relative_strong_convexity_weights(base, box).diag

    if doc.get('regularizer', 'l1') != 'l1':
        raise ConfigError(f"Line {doc.line_of('regularizer')}: only the l1 regularizer is supported")

    mu = _float(doc, 'mu')
    forward = _operator(doc, 'forward') if 'forward' in doc.values else linops.identity(n)
    analysis = _operator(doc, 'analysis') if 'analysis' in doc.values else linops.identity(forward.in_dim)
    constraint_map = _operator(doc, 'constraint_map') if 'constraint_map' in doc.values else None

    gme_spec = doc.get('gme_matrix', 'zero').split()
    if gme_spec[0] in ('design_scalar', 'design_inverse'):
        if len(gme_spec) != 2:
            raise ConfigError(f"Line {doc.line_of('gme_matrix')}: '{gme_spec[0]}' takes exactly one theta")
        theta = parse_float_list(gme_spec[1], 'gme_matrix', doc.line_of('gme_matrix'))[0]
        if gme_spec[0] == 'design_scalar':
            gme_matrix = design_B_scalar(theta, mu, weights, forward, analysis)
        else:
            gme_matrix = design_B_inverse(theta, mu, weights, analysis, forward)
    elif gme_spec[0] == 'zero' and len(gme_spec) == 1:
        gme_matrix = None
    else:
        gme_matrix = _operator(doc, 'gme_matrix')

    constraint_set = None
    if 'constraint.lo' in doc.values or 'constraint.hi' in doc.values:
        m = constraint_map.out_dim if constraint_map is not None else forward.in_dim
        lo = _vector(doc, 'constraint.lo', m) if 'constraint.lo' in doc.values else np.full(m, -np.inf)
        hi = _vector(doc, 'constraint.hi', m) if 'constraint.hi' in doc.values else np.full(m, np.inf)
        constraint_set = intervals(lo, hi)

    return assemble_problem(
        loss=loss, forward=forward, mu=mu, psi=l1_norm(), analysis=analysis,
        gme_matrix=gme_matrix, constraint_map=constraint_map, constraint_set=constraint_set,
        weights=weights,
    )


def load_problem(path) -> GmeProblem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"Cannot read problem file {path}: {exc}") from exc
    problem = problem_from_text(text)
    logger.info(f"Loaded {problem!r} from {path}")
    return problem


def _format_list(values) -> str:
    return ', '.join(repr(float(v)) for v in np.asarray(values, dtype=float).ravel())


def _write_operator(out: io.StringIO, blocks: List[str], key: str, L: linops.LinearMap):
    if L.kind in ('identity', 'first_difference', 'dct') and not L.transposed:
        out.write(f"{key} = {L.kind} {L.in_dim}\n")
    elif L.kind == 'zero':
        out.write(f"{key} = zero {L.in_dim} {L.out_dim}\n")
    else:
        M = linops.materialize(L)
        out.write(f"{key} = dense\n")
        rows = '\n'.join(', '.join(repr(float(v)) for v in row) for row in M)
        blocks.append(f"begin {key} {M.shape[0]} {M.shape[1]}\n{rows}\nend\n")


def problem_to_text(P: GmeProblem) -> str:
    """
    Inverse of ``problem_from_text`` for problems built from the supported
    losses; composite operators are written as dense blocks.
    """
    loss = P.loss
    base = getattr(loss, 'base', loss)
    out = io.StringIO()
    blocks: List[str] = []
    out.write(f"mu = {P.mu!r}\n")
    kind = {'quadratic': 'quadratic', 'poisson': 'poisson', 'clipped_gaussian': 'clipped'}.get(base.kind)
    if kind is None:
        raise GmeError(f"Cannot serialize a {base.kind} loss")
    out.write(f"loss = {kind}\n")
    out.write(f"observation = {_format_list(base.observation)}\n")
    if kind == 'clipped':
        out.write(f"clip_level = {base.clip_level!r}\nnoise_scale = {base.noise_scale!r}\n")
    if loss is not base:
        out.write(f"intervals.lo = {_format_list(loss.intervals.lo)}\n")
        out.write(f"intervals.hi = {_format_list(loss.intervals.hi)}\n")
        out.write(f"tail = {loss.tail.kind}\n")
    out.write(f"weights = {_format_list(P.weights)}\n")
    out.write(f"regularizer = {P.psi.kind}\n")
    _write_operator(out, blocks, 'forward', P.forward)
    _write_operator(out, blocks, 'analysis', P.analysis)
    _write_operator(out, blocks, 'gme_matrix', P.gme_matrix)
    _write_operator(out, blocks, 'constraint_map', P.constraint_map)
    if not P.constraint_set.is_intervals:
        raise GmeError("Only interval-product constraint sets can be serialized")
    out.write(f"constraint.lo = {_format_list(P.constraint_set.lo)}\n")
    out.write(f"constraint.hi = {_format_list(P.constraint_set.hi)}\n")
    for block in blocks:
        out.write(block)
    return out.getvalue()


def dump_problem(P: GmeProblem, path) -> None:
    Path(path).write_text(problem_to_text(P))
