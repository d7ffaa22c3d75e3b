"""Distribution families for the forecasting heads.

Each family maps raw network outputs to constrained parameters through a link,
and provides the negative log-likelihood (with gradients), CDF, quantile,
mean, standard deviation and a sampler. Parameters are passed as a dict of
arrays that broadcast against the observations.

Negative log-likelihoods drop additive constants:

* Normal: ``(x - mu)^2 / (2 sigma^2) + log(sigma)`` (drops log sqrt(2 pi))
* SkewNormal: ``(x - xi)^2 / (2 k^2) + log(k) - log Phi(alpha (x - xi) / k)``
  (drops log sqrt(2 pi) and the log 2 of the normalized density)
* Gamma, Poisson, Categorical: exact.

Reported NLLs are therefore comparable across runs of one family but not
across families.
"""

import math

import numpy as np

from . import special
from .exceptions import BracketError, ParameterError, SupportError

__all__ = [
    "Family",
    "Normal",
    "SkewNormal",
    "Gamma",
    "Poisson",
    "Categorical",
    "get_family",
    "FAMILIES",
    "LINKS",
    "nll",
    "nll_grad",
    "cdf",
    "quantile",
    "mean",
    "std",
    "sample",
]


# --------------------------------------------------------------------------
# links


def _softplus(u):
    return np.logaddexp(0.0, u)


def _sigmoid(u):
    return np.exp(-np.logaddexp(0.0, -u))


def _softmax(u):
    u = u - np.max(u, axis=-1, keepdims=True)
    e = np.exp(u)
    return e / np.sum(e, axis=-1, keepdims=True)


def _log_softmax(u):
    u = u - np.max(u, axis=-1, keepdims=True)
    return u - np.log(np.sum(np.exp(u), axis=-1, keepdims=True))


LINKS = {
    "identity": (lambda u: u, lambda u: np.ones_like(u)),
    "softplus": (_softplus, _sigmoid),
    "softmax": (_softmax, None),
}


# --------------------------------------------------------------------------
# shared helpers


def _broadcast(params, *extra):
    names = list(params)
    arrays = np.broadcast_arrays(*[np.asarray(params[n], dtype=float) for n in names],
                                 *[np.asarray(e, dtype=float) for e in extra])
    out = dict(zip(names, arrays[: len(names)]))
    return out, arrays[len(names):]


def _normal_draws(rng, size):
    # Box-Muller; 1 - U keeps the log argument in (0, 1]
    u1 = 1.0 - rng.random(size)
    u2 = rng.random(size)
    r = np.sqrt(-2.0 * np.log(u1))
    return r * np.cos(2.0 * math.pi * u2), r * np.sin(2.0 * math.pi * u2)


def _bisect(cdf_fn, q, lo, hi, tol=1e-10, max_iter=200):
    """Vectorized bisection for ``cdf_fn(x, idx) = q`` on ``[lo, hi]``.

    ``cdf_fn`` receives the trial points and the flat indices they belong to.
    """
    q, lo, hi = (np.array(a, dtype=float).ravel() for a in np.broadcast_arrays(q, lo, hi))
    idx = np.arange(q.size)
    flo, fhi = cdf_fn(lo, idx), cdf_fn(hi, idx)
    bad = (flo > q) | (fhi < q)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise BracketError(f"quantile bracket [{lo[i]:.6g}, {hi[i]:.6g}] does not contain "
                           f"q={q[i]:.6g} (cdf range [{flo[i]:.6g}, {fhi[i]:.6g}])")
    out = np.empty_like(q)
    active = idx
    for _ in range(max_iter):
        mid = 0.5 * (lo[active] + hi[active])
        fm = cdf_fn(mid, active)
        done = (np.abs(fm - q[active]) <= tol) | (hi[active] - lo[active] <= 4e-16 * np.maximum(1.0, np.abs(mid)))
        out[active[done]] = mid[done]
        below = fm < q[active]
        lo[active[below & ~done]] = mid[below & ~done]
        hi[active[~below & ~done]] = mid[~below & ~done]
        active = active[~done]
        if active.size == 0:
            return out
    raise BracketError(f"bisection did not reach tolerance {tol} for {active.size} points")


def _check_q(q):
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    return q


# --------------------------------------------------------------------------
# families


class Family:
    """Base class; subclasses define the parameterization and formulas."""

    name = ""
    param_names = ()
    links = ()
    continuous = True
    location_scale = False
    scale_param = None
    discrete = False

    @property
    def head_outputs(self):
        """Number of network outputs per parameter head."""
        return tuple(1 for _ in self.param_names)

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.to_dict().items()))))

    def to_dict(self):
        return {"tag": self.name}

    # raw outputs <-> parameters -------------------------------------------

    def link(self, raws):
        """Map a list of raw head outputs (each shape (n,) or (n, K)) to params."""
        return {name: LINKS[ln][0](np.asarray(r, dtype=float).reshape(np.shape(r)[0], -1)[:, 0])
                for name, ln, r in zip(self.param_names, self.links, raws)}

    def nll_raw(self, raws, x):
        """NLL and its gradient with respect to the raw head outputs."""
        params = self.link(raws)
        values, grads = self.nll_and_grad(params, x)
        raw_grads = []
        for name, ln, r in zip(self.param_names, self.links, raws):
            r = np.asarray(r, dtype=float).reshape(np.shape(r)[0], -1)[:, 0]
            raw_grads.append((grads[name] * LINKS[ln][1](r))[:, None])
        return values, raw_grads

    # validation --------------------------------------------------------------

    def validate(self, params):
        for name in self.param_names:
            if name not in params:
                raise ParameterError(f"{self.name}: missing parameter {name!r}")
            if not np.all(np.isfinite(params[name])):
                raise ParameterError(f"{self.name}: parameter {name!r} must be finite")

    def check_support(self, x):
        x = np.asarray(x, dtype=float)
        bad = ~np.isfinite(x)
        if np.any(bad):
            raise SupportError(f"{self.name}: non-finite observations", np.flatnonzero(bad))
        return x

    @staticmethod
    def _require_positive(params, *names, family=""):
        for n in names:
            if np.any(~(np.asarray(params[n]) > 0)):
                raise ParameterError(f"{family}: parameter {n!r} must be > 0")

    # public API -------------------------------------------------------------

    def nll(self, params, x):
        return self.nll_and_grad(params, x)[0]

    def nll_grad(self, params, x):
        return self.nll_and_grad(params, x)[1]

    def nll_and_grad(self, params, x):
        raise NotImplementedError

    def cdf(self, params, x):
        raise NotImplementedError

    def quantile(self, params, q):
        raise NotImplementedError

    def mean(self, params):
        raise NotImplementedError

    def std(self, params):
        raise NotImplementedError

    def sample(self, params, rng, size=None):
        raise NotImplementedError

    def denormalize(self, params, loc, scale):
        """Map parameters fitted on standardized data back to data units."""
        return dict(params)

    def moments_bracket(self, params, width=12.0):
        m, s = self.mean(params), self.std(params)
        return m - width * s, m + width * s


class Normal(Family):
    name = "normal"
    param_names = ("mu", "sigma")
    links = ("identity", "softplus")
    location_scale = True
    scale_param = "sigma"

    def validate(self, params):
        super().validate(params)
        self._require_positive(params, "sigma", family=self.name)

    def nll_and_grad(self, params, x):
        self.validate(params)
        x = self.check_support(x)
        p, (x,) = _broadcast(params, x)
        mu, sigma = p["mu"], p["sigma"]
        r = x - mu
        inv_var = 1.0 / (sigma * sigma)
        value = 0.5 * r * r * inv_var + np.log(sigma)
        grads = {"mu": -r * inv_var, "sigma": -r * r * inv_var / sigma + 1.0 / sigma}
        return value, grads

    def cdf(self, params, x):
        self.validate(params)
        return special.ndtr((np.asarray(x, dtype=float) - params["mu"]) / params["sigma"])

    def quantile(self, params, q):
        self.validate(params)
        q = _check_q(q)
        return params["mu"] + params["sigma"] * special.ndtri(q)

    def mean(self, params):
        return np.asarray(params["mu"], dtype=float)

    def std(self, params):
        return np.asarray(params["sigma"], dtype=float)

    def sample(self, params, rng, size=None):
        self.validate(params)
        p, _ = _broadcast(params)
        shape = p["mu"].shape if size is None else size
        z, _ = _normal_draws(rng, shape)
        return p["mu"] + p["sigma"] * z

    def denormalize(self, params, loc, scale):
        return {"mu": params["mu"] * scale + loc, "sigma": params["sigma"] * scale}


class SkewNormal(Family):
    """Skew-normal with location ``xi``, scale ``k`` and shape ``alpha``.

    ``log_cdf`` selects how ``log Phi`` enters the likelihood: ``"exact"``
    always evaluates ``log(ndtr)``; ``"approx"`` always uses the smooth
    piecewise approximation; ``"auto"`` (default) switches an entire batch to
    the approximation when any point's CDF underflows.
    """

    name = "skewnormal"
    param_names = ("xi", "k", "alpha")
    links = ("identity", "softplus", "identity")
    location_scale = True
    scale_param = "k"

    def __init__(self, log_cdf="auto"):
        if log_cdf not in ("auto", "exact", "approx"):
            raise ValueError(f"unknown log_cdf mode {log_cdf!r}")
        self.log_cdf = log_cdf

    def to_dict(self):
        return {"tag": self.name, "log_cdf": self.log_cdf}

    def validate(self, params):
        super().validate(params)
        self._require_positive(params, "k", family=self.name)

    def _log_cdf_terms(self, w):
        """Return (log Phi(w), d/dw log Phi(w), used_approx)."""
        if self.log_cdf != "approx":
            phi_cdf = special.ndtr(w)
            if self.log_cdf == "exact" or np.all(phi_cdf > 0):
                with np.errstate(divide="ignore"):
                    logc = np.log(phi_cdf)
                ratio = np.exp(special.norm_logpdf(w) - logc)
                return logc, ratio, False
        return special.log_cdf_normal(w), special.log_cdf_normal_grad(w), True

    def nll_and_grad(self, params, x):
        self.validate(params)
        x = self.check_support(x)
        p, (x,) = _broadcast(params, x)
        xi, k, alpha = p["xi"], p["k"], p["alpha"]
        z = (x - xi) / k
        w = alpha * z
        logc, ratio, _ = self._log_cdf_terms(w)
        value = 0.5 * z * z + np.log(k) - logc
        grads = {
            "xi": (-z + alpha * ratio) / k,
            "k": (1.0 - z * z + w * ratio) / k,
            "alpha": -z * ratio,
        }
        return value, grads

    @staticmethod
    def _delta(alpha):
        alpha = np.asarray(alpha, dtype=float)
        return alpha / np.sqrt(1.0 + alpha * alpha)

    def cdf(self, params, x):
        self.validate(params)
        z = (np.asarray(x, dtype=float) - params["xi"]) / params["k"]
        z, alpha = np.broadcast_arrays(z, np.asarray(params["alpha"], dtype=float))
        out = special.ndtr(z) - 2.0 * special.owen_t(z, alpha)
        return np.clip(out, 0.0, 1.0)

    def quantile(self, params, q):
        self.validate(params)
        q = _check_q(q)
        p, (q,) = _broadcast(params, q)
        shape = q.shape
        flat = {n: v.ravel() for n, v in p.items()}
        lo, hi = self.moments_bracket(flat)

        def f(xs, idx):
            return self.cdf({n: v[idx] for n, v in flat.items()}, xs)

        return _bisect(f, q.ravel(), lo, hi).reshape(shape)

    def mean(self, params):
        return params["xi"] + params["k"] * self._delta(params["alpha"]) * math.sqrt(2.0 / math.pi)

    def std(self, params):
        d = self._delta(params["alpha"])
        return params["k"] * np.sqrt(1.0 - 2.0 * d * d / math.pi)

    def sample(self, params, rng, size=None):
        self.validate(params)
        p, _ = _broadcast(params)
        shape = p["xi"].shape if size is None else size
        u0, u1 = _normal_draws(rng, shape)
        d = self._delta(p["alpha"])
        return p["xi"] + p["k"] * (d * np.abs(u0) + np.sqrt(1.0 - d * d) * u1)

    def denormalize(self, params, loc, scale):
        return {"xi": params["xi"] * scale + loc, "k": params["k"] * scale, "alpha": params["alpha"]}


class Gamma(Family):
    """Gamma with ``shape`` (alpha) and ``scale`` (beta) parameters."""

    name = "gamma"
    param_names = ("shape", "scale")
    links = ("softplus", "softplus")

    def validate(self, params):
        super().validate(params)
        self._require_positive(params, "shape", "scale", family=self.name)

    def check_support(self, x):
        x = super().check_support(x)
        bad = ~(x > 0)
        if np.any(bad):
            raise SupportError("gamma: observations must be > 0", np.flatnonzero(bad))
        return x

    def nll_and_grad(self, params, x):
        self.validate(params)
        x = self.check_support(x)
        p, (x,) = _broadcast(params, x)
        a, b = p["shape"], p["scale"]
        logx, logb = np.log(x), np.log(b)
        value = special.lgamma(a) + a * logb - (a - 1.0) * logx + x / b
        grads = {"shape": special.digamma(a) + logb - logx, "scale": a / b - x / (b * b)}
        return value, grads

    def cdf(self, params, x):
        self.validate(params)
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return special.gammainc(params["shape"], x / params["scale"])

    def quantile(self, params, q):
        self.validate(params)
        q = _check_q(q)
        p, (q,) = _broadcast(params, q)
        shape = q.shape
        flat = {n: v.ravel() for n, v in p.items()}
        lo, hi = self.moments_bracket(flat)
        lo = np.maximum(lo, 0.0)

        def f(xs, idx):
            return self.cdf({n: v[idx] for n, v in flat.items()}, xs)

        return _bisect(f, q.ravel(), lo, hi).reshape(shape)

    def mean(self, params):
        return np.asarray(params["shape"], dtype=float) * params["scale"]

    def std(self, params):
        return np.sqrt(params["shape"]) * params["scale"]

    @staticmethod
    def _standard(alpha, rng):
        """Unit-scale gamma draws by Marsaglia-Tsang; alpha < 1 via x * U^(1/alpha)."""
        alpha = np.asarray(alpha, dtype=float)
        boost = alpha < 1.0
        a = np.where(boost, alpha + 1.0, alpha).ravel()
        d = a - 1.0 / 3.0
        c = 1.0 / np.sqrt(9.0 * d)
        out = np.empty_like(a)
        todo = np.arange(a.size)
        while todo.size:
            x, _ = _normal_draws(rng, todo.size)
            v = 1.0 + c[todo] * x
            u = rng.random(todo.size)
            pos = v > 0
            v3 = np.where(pos, v, 1.0) ** 3
            with np.errstate(divide="ignore", invalid="ignore"):
                accept = pos & ((u < 1.0 - 0.0331 * x ** 4)
                                | (np.log(u) < 0.5 * x * x + d[todo] * (1.0 - v3 + np.log(v3))))
            out[todo[accept]] = d[todo[accept]] * v3[accept]
            todo = todo[~accept]
        out = out.reshape(alpha.shape)
        if np.any(boost):
            u = 1.0 - rng.random(alpha.shape)
            out = np.where(boost, out * u ** (1.0 / np.where(boost, alpha, 1.0)), out)
        return out

    def sample(self, params, rng, size=None):
        self.validate(params)
        p, _ = _broadcast(params)
        a, b = p["shape"], p["scale"]
        if size is not None:
            a, b = np.broadcast_to(a, size), np.broadcast_to(b, size)
        return self._standard(a, rng) * b


class Poisson(Family):
    name = "poisson"
    param_names = ("rate",)
    links = ("softplus",)
    continuous = False
    discrete = True

    _INVERSION_LIMIT = 30.0

    def validate(self, params):
        super().validate(params)
        self._require_positive(params, "rate", family=self.name)

    def check_support(self, x):
        x = super().check_support(x)
        bad = (x < 0) | (x != np.floor(x))
        if np.any(bad):
            raise SupportError("poisson: observations must be non-negative integers", np.flatnonzero(bad))
        return x

    def nll_and_grad(self, params, x):
        self.validate(params)
        x = self.check_support(x)
        p, (x,) = _broadcast(params, x)
        lam = p["rate"]
        value = lam - x * np.log(lam) + special.lgamma(x + 1.0)
        return value, {"rate": 1.0 - x / lam}

    def cdf(self, params, x):
        self.validate(params)
        p, (x,) = _broadcast(params, x)
        k = np.floor(x)
        out = np.zeros_like(x)
        ok = k >= 0
        out[ok] = special.gammaincc(k[ok] + 1.0, p["rate"][ok])
        return out

    def quantile(self, params, q):
        """Smallest integer ``k`` with ``cdf(k) >= q``."""
        self.validate(params)
        q = _check_q(q)
        p, (q,) = _broadcast(params, q)
        shape = q.shape
        lam, q = p["rate"].ravel(), q.ravel()
        lo = np.full_like(q, -1.0)
        hi = np.ceil(lam + 12.0 * np.sqrt(lam) + 12.0)
        if np.any(self.cdf({"rate": lam}, hi) < q):
            raise BracketError("poisson quantile bracket too narrow")
        while np.any(hi - lo > 1):
            mid = np.floor(0.5 * (lo + hi))
            step = hi - lo > 1
            hit = self.cdf({"rate": lam}, mid) >= q
            hi = np.where(step & hit, mid, hi)
            lo = np.where(step & ~hit, mid, lo)
        return hi.reshape(shape)

    def mean(self, params):
        return np.asarray(params["rate"], dtype=float)

    def std(self, params):
        return np.sqrt(params["rate"])

    def _inversion(self, lam, rng):
        u = rng.random(lam.shape)
        k = np.zeros_like(lam)
        pmf = np.exp(-lam)
        cum = pmf.copy()
        active = u > cum
        while np.any(active):
            k[active] += 1.0
            pmf[active] *= lam[active] / k[active]
            cum[active] += pmf[active]
            active = active & (u > cum) & (pmf > 0)
        return k

    def _ptrs(self, lam, rng):
        # Hormann's transformed rejection with squeeze, exact for lam >= 10
        out = np.empty_like(lam)
        slam = np.sqrt(lam)
        loglam = np.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        todo = np.arange(lam.size)
        while todo.size:
            u = rng.random(todo.size) - 0.5
            v = rng.random(todo.size)
            us = 0.5 - np.abs(u)
            at, bt = a[todo], b[todo]
            k = np.floor((2.0 * at / us + bt) * u + lam[todo] + 0.43)
            quick = (us >= 0.07) & (v <= vr[todo])
            reject = (k < 0) | ((us < 0.013) & (v > us))
            with np.errstate(divide="ignore", invalid="ignore"):
                kk = np.maximum(k, 0.0)
                lhs = np.log(v) + np.log(inv_alpha[todo]) - np.log(at / (us * us) + bt)
                rhs = -lam[todo] + kk * loglam[todo] - special.lgamma(kk + 1.0)
            accept = quick | (~reject & (lhs <= rhs))
            out[todo[accept]] = k[accept]
            todo = todo[~accept]
        return out

    def sample(self, params, rng, size=None):
        self.validate(params)
        p, _ = _broadcast(params)
        lam = p["rate"]
        if size is not None:
            lam = np.broadcast_to(lam, size)
        lam = np.array(lam, dtype=float).ravel()
        out = np.empty_like(lam)
        small = lam < self._INVERSION_LIMIT
        if np.any(small):
            out[small] = self._inversion(lam[small], rng)
        if np.any(~small):
            out[~small] = self._ptrs(lam[~small], rng)
        return out.reshape(p["rate"].shape if size is None else size)


class Categorical(Family):
    """Categorical over ``n_categories`` bins; parameter ``p`` has trailing axis K."""

    name = "categorical"
    param_names = ("p",)
    links = ("softmax",)
    continuous = False
    discrete = True

    def __init__(self, n_categories):
        n_categories = int(n_categories)
        if n_categories < 2:
            raise ValueError("categorical requires at least 2 categories")
        self.n_categories = n_categories

    def __repr__(self):
        return f"Categorical({self.n_categories})"

    def to_dict(self):
        return {"tag": self.name, "n_categories": self.n_categories}

    @property
    def head_outputs(self):
        return (self.n_categories,)

    def validate(self, params):
        super().validate(params)
        p = np.asarray(params["p"], dtype=float)
        if p.shape[-1] != self.n_categories:
            raise ParameterError(f"categorical: expected {self.n_categories} probabilities, got {p.shape[-1]}")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-9):
            raise ParameterError("categorical: probabilities must be non-negative and sum to 1")

    def check_support(self, x):
        x = super().check_support(x)
        bad = (x < 0) | (x >= self.n_categories) | (x != np.floor(x))
        if np.any(bad):
            raise SupportError(f"categorical: observations must be integers in [0, {self.n_categories})",
                               np.flatnonzero(bad))
        return x

    def link(self, raws):
        return {"p": _softmax(np.asarray(raws[0], dtype=float).reshape(-1, self.n_categories))}

    def nll_raw(self, raws, x):
        x = self.check_support(x).astype(int)
        u = np.asarray(raws[0], dtype=float).reshape(-1, self.n_categories)
        logp = _log_softmax(u)
        rows = np.arange(u.shape[0])
        value = -logp[rows, x]
        grad = np.exp(logp)
        grad[rows, x] -= 1.0
        return value, [grad]

    def _rows(self, params, x):
        p = np.asarray(params["p"], dtype=float)
        x = np.asarray(x, dtype=float)
        lead = np.broadcast_shapes(p.shape[:-1], x.shape)
        return np.broadcast_to(p, lead + (self.n_categories,)), np.broadcast_to(x, lead)

    def nll_and_grad(self, params, x):
        self.validate(params)
        x = self.check_support(x)
        p, x = self._rows(params, x)
        xi = x.astype(int)[..., None]
        px = np.take_along_axis(p, xi, axis=-1)[..., 0]
        with np.errstate(divide="ignore"):
            value = -np.log(px)
        grad = np.zeros(p.shape)
        np.put_along_axis(grad, xi, (-1.0 / px)[..., None], axis=-1)
        return value, {"p": grad}

    def cdf(self, params, x):
        self.validate(params)
        p, x = self._rows(params, x)
        cum = np.cumsum(p, axis=-1)
        k = np.floor(x).astype(int)
        out = np.where(k < 0, 0.0, 1.0)
        inside = (k >= 0) & (k < self.n_categories)
        vals = np.take_along_axis(cum, np.clip(k, 0, self.n_categories - 1)[..., None], axis=-1)[..., 0]
        return np.where(inside, np.minimum(vals, 1.0), out)

    def quantile(self, params, q):
        """Smallest category index whose cumulative mass reaches ``q``."""
        self.validate(params)
        q = _check_q(q)
        p, q = self._rows(params, q)
        cum = np.cumsum(p, axis=-1)
        idx = np.sum(cum < q[..., None], axis=-1)
        return np.minimum(idx, self.n_categories - 1).astype(float)

    def mean(self, params):
        p = np.asarray(params["p"], dtype=float)
        return p @ np.arange(self.n_categories, dtype=float)

    def std(self, params):
        p = np.asarray(params["p"], dtype=float)
        i = np.arange(self.n_categories, dtype=float)
        m = p @ i
        return np.sqrt(np.maximum(p @ (i * i) - m * m, 0.0))

    def sample(self, params, rng, size=None):
        self.validate(params)
        p = np.asarray(params["p"], dtype=float)
        if size is not None:
            p = np.broadcast_to(p, tuple(np.atleast_1d(size)) + (self.n_categories,))
        cum = np.cumsum(p, axis=-1)
        u = rng.random(p.shape[:-1])
        idx = np.sum(cum <= u[..., None], axis=-1)
        # guard against cumulative sums a hair below 1
        return np.minimum(idx, self.n_categories - 1).astype(float)


FAMILIES = {
    "normal": Normal,
    "skewnormal": SkewNormal,
    "gamma": Gamma,
    "poisson": Poisson,
    "categorical": Categorical,
}


def get_family(tag, **kwargs):
    """Build a family from its tag, e.g. ``get_family("categorical", n_categories=20)``."""
    if isinstance(tag, Family):
        return tag
    if isinstance(tag, dict):
        kwargs = {k: v for k, v in tag.items() if k != "tag"}
        tag = tag["tag"]
    key = str(tag).lower().replace("_", "").replace("-", "")
    if key not in FAMILIES:
        raise ValueError(f"unknown distribution family {tag!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[key](**kwargs)


def nll(family, params, x):
    return get_family(family).nll(params, x)


def nll_grad(family, params, x):
    return get_family(family).nll_grad(params, x)


def cdf(family, params, x):
    return get_family(family).cdf(params, x)


def quantile(family, params, q):
    return get_family(family).quantile(params, q)


def mean(family, params):
    return get_family(family).mean(params)


def std(family, params):
    return get_family(family).std(params)


def sample(family, params, rng, size=None):
    return get_family(family).sample(params, rng, size=size)
