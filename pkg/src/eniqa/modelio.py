"""Versioned text persistence for scalers, SVMs and full ENIQA models.

File layout::

    ENIQA-MODEL v1
    [config]            (full models only)
    [scaler]            (full models only)
    [svc]               classifier, when present
    [svr:<label>]       one per regressor
    [end]

Every section is a fixed sequence of ``key value...`` lines. Floats are
written with ``repr`` so they parse back bit-exactly.
"""
from __future__ import annotations

import numpy as np

from .features import LAYOUT_VERSION, FeatureConfig
from .spectral import LogGaborParams
from .svm import BinarySvc, ScaleParams, SvcModel, SvmParams, SvrModel

__all__ = ["ModelFormatError", "serialize_model", "deserialize_model", "save_model",
           "load_model", "HEADER"]

HEADER = "ENIQA-MODEL"
VERSION = "v1"


class ModelFormatError(ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = "line %d: %s" % (lineno, message)
        super().__init__(message)


def _f(x) -> str:
    return repr(float(x))


def _vec(xs) -> str:
    return " ".join(_f(x) for x in xs)


def _check_label(label) -> str:
    label = str(label)
    if not label or any(ch.isspace() for ch in label) or "]" in label:
        raise ValueError("label %r cannot be serialized" % label)
    return label


# ------------------------------------------------------------------ writing


def _write_svc(out, m: SvcModel):
    out.append("[svc]")
    out.append("gamma " + _f(m.gamma))
    out.append("C " + _f(m.C))
    out.append("classes %d %s" % (len(m.classes), " ".join(_check_label(c) for c in m.classes)))
    out.append("pairs %d" % len(m.pairs))
    for p in m.pairs:
        out.append("pair %d %d" % (p.first, p.second))
        out.append("rho " + _f(p.rho))
        out.append("prob_a " + _f(p.prob_a))
        out.append("prob_b " + _f(p.prob_b))
        _write_svs(out, p.sv, p.coef)


def _write_svs(out, sv, coef):
    out.append("nsv %d %d" % (len(coef), sv.shape[1]))
    for c, row in zip(coef, sv):
        out.append(_f(c) + " " + _vec(row))


def _write_svr(out, label, m: SvrModel):
    out.append("[svr:%s]" % _check_label(label))
    out.append("gamma " + _f(m.gamma))
    out.append("C " + _f(m.C))
    out.append("epsilon " + _f(m.epsilon))
    out.append("rho " + _f(m.rho))
    _write_svs(out, m.sv, m.coef)


def serialize_model(model) -> str:
    """Serialize an :class:`SvcModel`, :class:`SvrModel` or ``EniqaModel``."""
    from .pipeline import EniqaModel

    out = ["%s %s" % (HEADER, VERSION)]
    if isinstance(model, SvcModel):
        _write_svc(out, model)
    elif isinstance(model, SvrModel):
        _write_svr(out, "model", model)
    elif isinstance(model, EniqaModel):
        fc = model.feature_config
        lg = fc.log_gabor
        out.append("[config]")
        out.append("model_kind " + model.model_kind)
        out.append("layout_version %d" % LAYOUT_VERSION)
        out.append("window %d %d" % fc.window)
        out.append("keep_fraction " + _f(fc.keep_fraction))
        out.append("center_wavelengths " + _vec(lg.center_wavelengths))
        out.append("orientations " + _vec(lg.orientations))
        out.append("sigma_ratio " + _f(lg.sigma_ratio))
        out.append("sigma_theta " + _f(lg.sigma_theta))
        p = model.params
        out.append("svm %s %s %s %s %d" % (_f(p.C), _f(p.gamma), _f(p.epsilon), _f(p.tol), p.seed))
        out.append("[scaler]")
        out.append("dim %d" % model.scaler.dim)
        out.append("min " + _vec(model.scaler.mins))
        out.append("max " + _vec(model.scaler.maxs))
        _write_svc(out, model.classifier)
        for label in model.classifier.classes:
            _write_svr(out, label, model.regressors[label])
    else:
        raise TypeError("cannot serialize %r" % type(model).__name__)
    out.append("[end]")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------------ reading


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    @property
    def lineno(self):
        return self.pos + 1

    def error(self, msg):
        return ModelFormatError(msg, min(self.lineno, max(len(self.lines), 1)))

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise self.error("unexpected end of file (truncated model)")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def peek(self):
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def expect(self, text):
        line = self.next()
        if line.strip() != text:
            self.pos -= 1
            raise self.error("expected %r, got %r" % (text, line))

    def field(self, key, count=None):
        line = self.next()
        parts = line.split()
        if not parts or parts[0] != key:
            self.pos -= 1
            raise self.error("expected field %r, got %r" % (key, line))
        vals = parts[1:]
        if count is not None and len(vals) != count:
            self.pos -= 1
            raise self.error("field %r expects %d value(s), got %d" % (key, count, len(vals)))
        return vals

    def floats(self, key, count=None):
        vals = self.field(key, count)
        return [self._float(v) for v in vals]

    def _float(self, tok):
        try:
            v = float(tok)
        except ValueError:
            self.pos -= 1
            raise self.error("malformed number %r" % tok) from None
        return v

    def ints(self, key, count=None):
        vals = self.field(key, count)
        try:
            return [int(v) for v in vals]
        except ValueError:
            self.pos -= 1
            raise self.error("malformed integer in %r" % key) from None


def _read_svs(r: _Reader):
    n, d = r.ints("nsv", 2)
    coef = np.empty(n)
    sv = np.empty((n, d))
    for i in range(n):
        parts = r.next().split()
        if len(parts) != d + 1:
            r.pos -= 1
            raise r.error("support vector row expects %d values, got %d" % (d + 1, len(parts)))
        vals = [r._float(t) for t in parts]
        coef[i] = vals[0]
        sv[i] = vals[1:]
    return sv, coef


def _read_svc(r: _Reader) -> SvcModel:
    r.expect("[svc]")
    (gamma,) = r.floats("gamma", 1)
    (C,) = r.floats("C", 1)
    parts = r.field("classes")
    try:
        k = int(parts[0])
    except (ValueError, IndexError):
        r.pos -= 1
        raise r.error("malformed class count") from None
    if len(parts) != k + 1:
        r.pos -= 1
        raise r.error("classes declares %d labels, got %d" % (k, len(parts) - 1))
    classes = parts[1:]
    (npairs,) = r.ints("pairs", 1)
    if npairs != k * (k - 1) // 2:
        r.pos -= 1
        raise r.error("expected %d pairs for %d classes, got %d" % (k * (k - 1) // 2, k, npairs))
    pairs = []
    for _ in range(npairs):
        a, b = r.ints("pair", 2)
        (rho,) = r.floats("rho", 1)
        (pa,) = r.floats("prob_a", 1)
        (pb,) = r.floats("prob_b", 1)
        sv, coef = _read_svs(r)
        pairs.append(BinarySvc(a, b, sv, coef, rho, pa, pb))
    return SvcModel(classes, gamma, C, pairs)


def _read_svr(r: _Reader):
    line = r.next().strip()
    if not (line.startswith("[svr:") and line.endswith("]")):
        r.pos -= 1
        raise r.error("expected an [svr:<label>] section, got %r" % line)
    label = line[5:-1]
    (gamma,) = r.floats("gamma", 1)
    (C,) = r.floats("C", 1)
    (eps,) = r.floats("epsilon", 1)
    (rho,) = r.floats("rho", 1)
    sv, coef = _read_svs(r)
    return label, SvrModel(sv, coef, rho, gamma, C, eps)


def deserialize_model(text: str):
    """Inverse of :func:`serialize_model`."""
    from .pipeline import EniqaModel

    if isinstance(text, bytes):
        text = text.decode("utf-8")
    r = _Reader(text)
    if not r.lines or not r.lines[0].strip():
        raise ModelFormatError("missing header", 1)
    head = r.next().split()
    if len(head) != 2 or head[0] != HEADER:
        raise ModelFormatError("missing header", 1)
    if head[1] != VERSION:
        raise ModelFormatError("unsupported model version %r" % head[1], 1)
    section = (r.peek() or "").strip()
    if section == "[svc]":
        model = _read_svc(r)
    elif section.startswith("[svr:"):
        model = _read_svr(r)[1]
    elif section == "[config]":
        model = _read_full(r, EniqaModel)
    else:
        raise r.error("unexpected section %r" % section)
    r.expect("[end]")
    return model


def _read_full(r: _Reader, cls):
    r.expect("[config]")
    (kind,) = r.field("model_kind", 1)
    (layout,) = r.ints("layout_version", 1)
    if layout != LAYOUT_VERSION:
        r.pos -= 1
        raise r.error("unsupported feature layout version %d" % layout)
    window = tuple(r.ints("window", 2))
    (keep,) = r.floats("keep_fraction", 1)
    wl = r.floats("center_wavelengths", 2)
    orients = r.floats("orientations", 4)
    (sr,) = r.floats("sigma_ratio", 1)
    (st,) = r.floats("sigma_theta", 1)
    svm = r.field("svm", 5)
    try:
        params = SvmParams(float(svm[0]), float(svm[1]), float(svm[2]), float(svm[3]), int(svm[4]))
    except ValueError:
        r.pos -= 1
        raise r.error("malformed svm parameters") from None
    try:
        config = FeatureConfig(window, keep, LogGaborParams(tuple(wl), tuple(orients), sr, st))
    except ValueError as exc:
        raise r.error("invalid feature config: %s" % exc) from None
    r.expect("[scaler]")
    (dim,) = r.ints("dim", 1)
    mins = np.array(r.floats("min", dim))
    maxs = np.array(r.floats("max", dim))
    svc = _read_svc(r)
    regs = {}
    for _ in svc.classes:
        label, m = _read_svr(r)
        regs[label] = m
    try:
        return cls(ScaleParams(mins, maxs), svc, regs, config, kind, params)
    except ValueError as exc:
        raise r.error(str(exc)) from None


def save_model(path, model) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_model(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return deserialize_model(fh.read())

