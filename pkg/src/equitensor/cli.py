"""Command-line interface: dataset generation, training, evaluation, audits.

Commands
--------
gen       write an analytic dataset to disk (neo-hookean | tensegrity | j2)
train     train a model from a config file; writes model, history CSV, report
eval      evaluate a saved model on a dataset
symtest   measure the equivariance error of a saved model
discover  train rotation-wrapped models over several seeds to recover the
          symmetry frame of a rotated dataset

Every command prints a JSON report to stdout (and optionally to a file).
Reports carry a sha256 hash of the fully resolved configuration and the
package provenance string, so a report identifies the exact run that
produced it.  Apart from wall-time fields, reports are bit-identical
across reruns of the same configuration.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(non-convergence or non-finite loss), 4 I/O failure (missing, unreadable,
or corrupt files).

Config files
------------
``train`` and ``discover`` read a flat text config: one ``key = value``
pair per line, ``#`` comments, no sections.  ``--set key=value`` flags
override file values.  Unknown keys are rejected.

train keys:
  data            path to the training dataset (required)
  val_data        path to an explicit validation dataset (default: tail split)
  model           tensor-ff | tensor-gru | scalar-mlp | scalar-gru (required)
  hidden          comma-separated hidden widths, e.g. "23,23" (required)
  sym_class       none | triclinic | orthotropic | cubic | isotropic
                  (default isotropic; ignored by scalar models)
  activation      tanh | logistic | softplus | identity (default tanh)
  rotation        true/false: learn a rotation into the symmetry frame
                  (default false)
  penalty_weight  quaternion unit-norm penalty weight, 3-D rotation only
                  (default 1e-2)
  lr              Adam learning rate (default 1e-3)
  batch_size      minibatch size (default 128)
  epochs          epoch count (default: 2000 for pair data, 500 for sequences)
  seed            training seed (default 0)
  val_fraction    tail fraction held out when val_data is absent (default 0.2)
  in_scaler       component_wise | tensor_symmetry_preserving | global
                  (default: model-kind default)
  out_scaler      same choices as in_scaler
  out             path for the saved model (required)
  history         path for the per-epoch CSV (default: <out>.history.csv)
  report          path for the JSON report (default: <out>.report.json)

discover keys:
  data            path to the rotated dataset (required)
  seeds           comma-separated training seeds (default "0,1,2,3,4")
  hidden          comma-separated hidden widths (required)
  sym_class       symmetry class of the wrapped network (default cubic)
  activation      default tanh
  penalty_weight  default 1e-2
  lr / batch_size / epochs / val_fraction   as for train
  true_deg        ground-truth rotation angle in degrees; when given, the
                  report includes each run's angle error modulo the class's
                  fundamental domain (45 degrees for planar cubic)
  save_prefix     when given, each run's model is saved to
                  <save_prefix><seed>.eqt
  report          path for the JSON report (default: <config>.report.json)

Environment: EQUITENSOR_THREADS caps the BLAS thread count (applied before
numpy is loaded).
"""

import argparse
import hashlib
import json
import os
import sys
import time

# ---------------------------------------------------------------------------
# thread cap: must land in the environment before numpy initialises its BLAS
# ---------------------------------------------------------------------------

_threads = os.environ.get("EQUITENSOR_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

PROVENANCE = "equitensor-0.1.0"

GENERATOR_NAMES = ("neo-hookean", "tensegrity", "j2")


class ConfigError(Exception):
    """Invalid or inconsistent run configuration (exit code 2)."""


class IOFailure(Exception):
    """Missing, unreadable, or corrupt input/output file (exit code 4)."""


# ---------------------------------------------------------------------------
# config parsing: flat "key = value" text with typed schemas
# ---------------------------------------------------------------------------


def parse_config_text(text, source="<config>"):
    """Parse flat ``key = value`` lines into a str->str dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _parse_bool(value):
    low = value.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_int_tuple(value):
    if not value:
        return ()
    return tuple(int(part.strip()) for part in value.split(","))


def _parse_int_list(value):
    return list(_parse_int_tuple(value))


def _parse_optional_int(value):
    return None if value.lower() in ("", "none") else int(value)


def _parse_optional_float(value):
    return None if value.lower() in ("", "none") else float(value)


def _parse_optional_str(value):
    return None if value == "" or value.lower() == "none" else value


def _choice(options):
    def parse(value):
        if value not in options:
            raise ValueError(f"must be one of {', '.join(options)}; got {value!r}")
        return value

    return parse


_MODEL_KINDS = ("tensor-ff", "tensor-gru", "scalar-mlp", "scalar-gru")
_SYM_CLASSES = ("none", "triclinic", "orthotropic", "cubic", "isotropic")
_ACTIVATIONS = ("tanh", "logistic", "softplus", "identity")
_SCALERS = ("component_wise", "tensor_symmetry_preserving", "global")

# schema entries: key -> (parser, default); _REQUIRED marks mandatory keys
_REQUIRED = object()

TRAIN_SCHEMA = {
    "data": (str, _REQUIRED),
    "val_data": (_parse_optional_str, None),
    "model": (_choice(_MODEL_KINDS), _REQUIRED),
    "hidden": (_parse_int_tuple, _REQUIRED),
    "sym_class": (_choice(_SYM_CLASSES), "isotropic"),
    "activation": (_choice(_ACTIVATIONS), "tanh"),
    "rotation": (_parse_bool, False),
    "penalty_weight": (float, 1e-2),
    "lr": (float, 1e-3),
    "batch_size": (int, 128),
    "epochs": (_parse_optional_int, None),
    "seed": (int, 0),
    "val_fraction": (float, 0.2),
    "in_scaler": (_choice(_SCALERS), None),
    "out_scaler": (_choice(_SCALERS), None),
    "out": (str, _REQUIRED),
    "history": (_parse_optional_str, None),
    "report": (_parse_optional_str, None),
}

DISCOVER_SCHEMA = {
    "data": (str, _REQUIRED),
    "seeds": (_parse_int_list, [0, 1, 2, 3, 4]),
    "hidden": (_parse_int_tuple, _REQUIRED),
    "sym_class": (_choice(_SYM_CLASSES), "cubic"),
    "activation": (_choice(_ACTIVATIONS), "tanh"),
    "penalty_weight": (float, 1e-2),
    "lr": (float, 1e-3),
    "batch_size": (int, 128),
    "epochs": (_parse_optional_int, None),
    "val_fraction": (float, 0.2),
    "true_deg": (_parse_optional_float, None),
    "save_prefix": (_parse_optional_str, None),
    "report": (_parse_optional_str, None),
}


def resolve_config(raw, schema, source="<config>"):
    """Validate raw string values against a schema; reject unknown keys."""
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"{source}: unknown key(s): {', '.join(unknown)}")
    resolved = {}
    for key, (parser, default) in schema.items():
        if key in raw:
            try:
                resolved[key] = parser(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{source}: key {key!r}: {exc}") from exc
        elif default is _REQUIRED:
            raise ConfigError(f"{source}: missing required key {key!r}")
        else:
            resolved[key] = default
    return resolved


def load_config_file(path, schema, overrides=()):
    """Read a config file, apply ``key=value`` overrides, resolve types."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = parse_config_text(fh.read(), source=path)
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        raw[key] = value.strip()
    return resolve_config(raw, schema, source=path)


def config_hash(command, config):
    """sha256 over the canonical JSON of the resolved configuration."""
    payload = json.dumps({"command": command, "config": config}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _jsonable(config):
    out = {}
    for key, value in config.items():
        if isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


# ---------------------------------------------------------------------------
# guarded I/O around the library's file formats
# ---------------------------------------------------------------------------


def _read_dataset(path):
    from . import datasets

    try:
        return datasets.read_dataset(path)
    except OSError as exc:
        raise IOFailure(f"cannot read dataset {path}: {exc}") from exc
    except ValueError as exc:
        raise IOFailure(f"corrupt dataset {path}: {exc}") from exc


def _load_model(path):
    from . import training

    try:
        return training.TrainedModel.load(path)
    except OSError as exc:
        raise IOFailure(f"cannot read model {path}: {exc}") from exc
    except ValueError as exc:
        raise IOFailure(f"corrupt model file {path}: {exc}") from exc


def _write_guard(path, write):
    try:
        write(path)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def emit_report(report, path=None):
    text = json.dumps(report, indent=2, sort_keys=False)
    print(text)
    if path:

        def write(p):
            with open(p, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")

        _write_guard(path, write)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args):
    from . import datasets

    if args.n <= 0:
        raise ConfigError("--n must be positive")
    if args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    if not (0.0 < args.eig_low <= args.eig_high):
        raise ConfigError("--eig-low/--eig-high must satisfy 0 < low <= high")

    config = {
        "generator": args.generator,
        "n": args.n,
        "seed": args.seed,
        "out": args.out,
        "eig_low": args.eig_low,
        "eig_high": args.eig_high,
    }

    if args.generator == "neo-hookean":
        params = datasets.NeoHookeanParams(lam=args.lam, mu=args.mu)
        config.update(dim=args.dim, lam=args.lam, mu=args.mu)
        dataset = datasets.gen_neo_hookean(
            params,
            args.n,
            dim=args.dim,
            eig_low=args.eig_low,
            eig_high=args.eig_high,
            seed=args.seed,
        )
    elif args.generator == "tensegrity":
        if args.alpha <= 0 or args.alpha > 1:
            raise ConfigError("--alpha must lie in (0, 1]")
        params = datasets.TensegrityParams(
            k_bar=args.k_bar,
            k_cable=args.k_cable,
            alpha=args.alpha,
            p_cr=args.p_cr,
        )
        config.update(
            k_bar=args.k_bar,
            k_cable=args.k_cable,
            alpha=args.alpha,
            p_cr=args.p_cr,
            rotate_deg=args.rotate_deg,
        )
        dataset = datasets.gen_tensegrity(
            params,
            args.n,
            eig_low=args.eig_low,
            eig_high=args.eig_high,
            seed=args.seed,
            rotate_deg=args.rotate_deg,
        )
    else:  # j2
        if args.steps <= 0:
            raise ConfigError("--steps must be positive")
        if args.amplitude <= 0:
            raise ConfigError("--amplitude must be positive")
        params = datasets.J2Params(
            lam=args.lam,
            mu=args.mu,
            sigma_y=args.sigma_y,
            hardening=args.hardening,
        )
        config.update(
            steps=args.steps,
            amplitude=args.amplitude,
            lam=args.lam,
            mu=args.mu,
            sigma_y=args.sigma_y,
            hardening=args.hardening,
        )
        config.pop("eig_low")
        config.pop("eig_high")
        dataset = datasets.gen_j2_sequences(
            params,
            args.n,
            steps=args.steps,
            amplitude=args.amplitude,
            seed=args.seed,
        )

    _write_guard(args.out, lambda p: datasets.write_dataset(p, dataset))

    report = {
        "command": "gen",
        "provenance": PROVENANCE,
        "config_hash": config_hash("gen", _jsonable(config)),
        "config": _jsonable(config),
        "out": args.out,
        "dim": dataset.dim,
        "kind": dataset.kind,
        "steps": dataset.steps,
        "n": dataset.X.shape[0],
        "generator": dataset.generator,
    }
    emit_report(report, args.report)
    return report


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _check_model_data(spec, dataset, source):
    if spec.is_sequence != (dataset.kind == "sequence"):
        raise ConfigError(
            f"{source}: model kind {spec.kind!r} expects "
            f"{'sequence' if spec.is_sequence else 'pair'} data, "
            f"but dataset kind is {dataset.kind!r}"
        )


def _train_one(spec, dataset, val_dataset, config):
    from . import training

    train_config = training.TrainConfig(
        lr=config["lr"],
        batch_size=config["batch_size"],
        epochs=config["epochs"],
        seed=config["seed"],
        val_fraction=config["val_fraction"],
        in_scaler=config.get("in_scaler"),
        out_scaler=config.get("out_scaler"),
    )
    if val_dataset is not None:
        return training.train(
            spec,
            dataset.X,
            dataset.Y,
            train_config,
            Xval=val_dataset.X,
            Yval=val_dataset.Y,
        )
    return training.train(spec, dataset.X, dataset.Y, train_config)


def cmd_train(args):
    from . import networks, training

    config = load_config_file(args.config, TRAIN_SCHEMA, args.set or ())
    dataset = _read_dataset(config["data"])
    val_dataset = _read_dataset(config["val_data"]) if config["val_data"] else None
    if val_dataset is not None and val_dataset.dim != dataset.dim:
        raise ConfigError(f"{args.config}: val_data dimension differs from data")

    try:
        spec = networks.ModelSpec(
            kind=config["model"],
            dim=dataset.dim,
            hidden=config["hidden"],
            sym_class=config["sym_class"],
            activation=config["activation"],
            rotation=config["rotation"],
            penalty_weight=config["penalty_weight"],
        )
    except ValueError as exc:
        raise ConfigError(f"{args.config}: {exc}") from exc
    _check_model_data(spec, dataset, args.config)

    start = time.perf_counter()
    trained, history = _train_one(spec, dataset, val_dataset, config)
    wall = time.perf_counter() - start

    out_path = config["out"]
    history_path = config["history"] or out_path + ".history.csv"
    report_path = config["report"] or out_path + ".report.json"
    _write_guard(out_path, trained.save)
    _write_guard(history_path, lambda p: training.write_history_csv(p, history))

    val_losses = [rec.val_loss for rec in history]
    best = int(min(range(len(val_losses)), key=val_losses.__getitem__))
    report = {
        "command": "train",
        "provenance": PROVENANCE,
        "config_hash": config_hash("train", _jsonable(config)),
        "config": _jsonable(config),
        "model": out_path,
        "history": history_path,
        "n_params": trained.model.layout.n_params,
        "seed": config["seed"],
        "epochs": len(history),
        "final_train_loss": history[-1].train_loss,
        "final_val_loss": history[-1].val_loss,
        "min_val_loss": val_losses[best],
        "min_val_epoch": best + 1,
        "wall_time_s": wall,
    }
    emit_report(report, report_path)
    return report


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args):
    import numpy as np

    from . import symmetry, training

    trained = _load_model(args.model)
    dataset = _read_dataset(args.data)
    if dataset.dim != trained.spec.dim:
        raise ConfigError(
            f"dataset dimension {dataset.dim} does not match model "
            f"dimension {trained.spec.dim}"
        )
    _check_model_data(trained.spec, dataset, args.data)

    config = {
        "model": args.model,
        "data": args.data,
        "sym_class": args.sym_class,
        "n_sym": args.n_sym,
        "seed": args.seed,
    }

    pred = trained.predict(dataset.X)
    loss = training.validation_loss(trained, dataset.X, dataset.Y)
    sq = (pred - dataset.Y) ** 2
    rmse = np.sqrt(sq.reshape(-1, sq.shape[-1]).mean(axis=0))

    report = {
        "command": "eval",
        "provenance": PROVENANCE,
        "config_hash": config_hash("eval", config),
        "config": config,
        "n": dataset.X.shape[0],
        "validation_loss": float(loss),
        "rmse_per_component": [float(v) for v in rmse],
    }
    if args.sym_class:
        if args.n_sym <= 0:
            raise ConfigError("--n-sym must be positive")
        rng = np.random.default_rng(args.seed)
        group = symmetry.SymmetryClass(args.sym_class, trained.spec.dim)
        report["epsilon_sym"] = float(
            training.symmetry_error(trained, group, n_samples=args.n_sym, rng=rng)
        )
    emit_report(report, args.report)
    return report


# ---------------------------------------------------------------------------
# symtest
# ---------------------------------------------------------------------------


def cmd_symtest(args):
    import numpy as np

    from . import symmetry, training

    if args.n <= 0:
        raise ConfigError("--n must be positive")
    trained = _load_model(args.model)
    config = {
        "model": args.model,
        "sym_class": args.sym_class,
        "n": args.n,
        "seed": args.seed,
        "seq_len": args.seq_len,
    }
    rng = np.random.default_rng(args.seed)
    eps = training.symmetry_error(
        trained,
        symmetry.SymmetryClass(args.sym_class, trained.spec.dim),
        n_samples=args.n,
        rng=rng,
        seq_len=args.seq_len,
    )
    report = {
        "command": "symtest",
        "provenance": PROVENANCE,
        "config_hash": config_hash("symtest", config),
        "config": config,
        "n": args.n,
        "seed": args.seed,
        "epsilon_sym": float(eps),
    }
    emit_report(report, args.report)
    return report


# ---------------------------------------------------------------------------
# discover
# ---------------------------------------------------------------------------


def angle_error_mod(learned_deg, true_deg, period_deg=45.0):
    """Distance between two angles modulo a fundamental-domain period."""
    delta = (learned_deg - true_deg) % period_deg
    return min(delta, period_deg - delta)


# fundamental domain of the frame ambiguity: rotating the frame by the period
# maps the symmetry group onto itself, so angles are only identifiable mod it
_FUNDAMENTAL_DEG = {
    "isotropic": None,
    "cubic": 45.0,
    "orthotropic": 90.0,
    "triclinic": 360.0,
    "none": 360.0,
}


def cmd_discover(args):
    import numpy as np

    from . import networks

    config = load_config_file(args.config, DISCOVER_SCHEMA, args.set or ())
    dataset = _read_dataset(config["data"])
    if dataset.kind != "pair":
        raise ConfigError(f"{args.config}: discovery expects pair data")
    if not config["seeds"]:
        raise ConfigError(f"{args.config}: seeds must be non-empty")

    try:
        spec = networks.ModelSpec(
            kind="tensor-ff",
            dim=dataset.dim,
            hidden=config["hidden"],
            sym_class=config["sym_class"],
            activation=config["activation"],
            rotation=True,
            penalty_weight=config["penalty_weight"],
        )
    except ValueError as exc:
        raise ConfigError(f"{args.config}: {exc}") from exc

    period = _FUNDAMENTAL_DEG[config["sym_class"]]
    runs = []
    start = time.perf_counter()
    for seed in config["seeds"]:
        run_config = dict(config)
        run_config["seed"] = seed
        model = networks.build_model(spec)
        init_params = networks.init_params(model, np.random.default_rng(seed))
        initial = _frame_summary(model, init_params, dataset.dim)

        trained, history = _train_one(spec, dataset, None, run_config)
        learned = _frame_summary(trained.model, trained.params, dataset.dim)
        val_losses = [rec.val_loss for rec in history]
        best = min(val_losses)
        run = {
            "seed": seed,
            "final_val_loss": history[-1].val_loss,
            "val_loss": best,
            "initial_deg": initial.get("angle_deg"),
            "learned_deg": learned.get("angle_deg"),
        }
        if dataset.dim == 3:
            run["initial_quaternion"] = initial["quaternion"]
            run["learned_quaternion"] = learned["quaternion"]
        if config["true_deg"] is not None and period is not None and dataset.dim == 2:
            run["error_mod_deg"] = angle_error_mod(
                run["learned_deg"], config["true_deg"], period
            )
        if config["save_prefix"]:
            path = f"{config['save_prefix']}{seed}.eqt"
            _write_guard(path, trained.save)
            run["model"] = path
        runs.append(run)
    wall = time.perf_counter() - start

    report = {
        "command": "discover",
        "provenance": PROVENANCE,
        "config_hash": config_hash("discover", _jsonable(config)),
        "config": _jsonable(config),
        "fundamental_deg": period,
        "runs": runs,
        "wall_time_s": wall,
    }
    if config["true_deg"] is not None and dataset.dim == 2 and period is not None:
        recovered = [r for r in runs if r["error_mod_deg"] <= args.recover_deg]
        report["recovered"] = len(recovered)
        report["total"] = len(runs)
        if recovered:
            report["median_recovered_loss"] = float(
                np.median([r["val_loss"] for r in recovered])
            )
    report_path = config["report"] or args.config + ".report.json"
    emit_report(report, report_path)
    return report


def _frame_summary(model, params, dim):
    """Angle (2-D) or normalized quaternion (3-D) of a rotation wrapper."""
    import numpy as np

    if dim == 2:
        return {"angle_deg": float(np.rad2deg(model.angle(params)) % 360.0)}
    quat = model.layout.view(params, "rotation")
    quat = quat / np.linalg.norm(quat)
    return {"quaternion": [float(v) for v in quat]}


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="equitensor",
        description="Equivariant tensor-feature networks: data, training, audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an analytic dataset")
    gen.add_argument("generator", choices=GENERATOR_NAMES)
    gen.add_argument("--n", type=int, required=True, help="number of samples")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output dataset path")
    gen.add_argument("--report", default=None, help="also write the JSON report here")
    gen.add_argument("--dim", type=int, choices=(2, 3), default=3,
                     help="tensor dimension (neo-hookean only)")
    gen.add_argument("--eig-low", type=float, default=0.7,
                     help="lower stretch eigenvalue bound")
    gen.add_argument("--eig-high", type=float, default=1.3,
                     help="upper stretch eigenvalue bound")
    gen.add_argument("--lam", type=float, default=0.5769, help="Lame lambda")
    gen.add_argument("--mu", type=float, default=0.3846, help="Lame mu")
    gen.add_argument("--rotate-deg", type=float, default=0.0,
                     help="rotate the tensegrity dataset frame by this angle")
    gen.add_argument("--k-bar", type=float, default=100.0, help="bar stiffness")
    gen.add_argument("--k-cable", type=float, default=1.0, help="cable stiffness")
    gen.add_argument("--alpha", type=float, default=0.95,
                     help="cable rest-length prestress ratio")
    gen.add_argument("--p-cr", type=float, default=2.0, help="bar buckling force")
    gen.add_argument("--steps", type=int, default=100,
                     help="sequence length (j2 only)")
    gen.add_argument("--amplitude", type=float, default=0.02,
                     help="strain-path amplitude (j2 only)")
    gen.add_argument("--sigma-y", type=float, default=0.005, help="yield stress")
    gen.add_argument("--hardening", type=float, default=0.05,
                     help="isotropic hardening modulus")
    gen.set_defaults(func=cmd_gen)

    train = sub.add_parser("train", help="train a model from a config file")
    train.add_argument("config", help="path to a flat key=value config file")
    train.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config value (repeatable)")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--sym-class", choices=_SYM_CLASSES, default=None,
                    help="also measure the equivariance error for this class")
    ev.add_argument("--n-sym", type=int, default=200,
                    help="sample count for the equivariance error")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--report", default=None)
    ev.set_defaults(func=cmd_eval)

    sym = sub.add_parser("symtest", help="measure a model's equivariance error")
    sym.add_argument("--model", required=True)
    sym.add_argument("--class", dest="sym_class", required=True, choices=_SYM_CLASSES)
    sym.add_argument("--n", type=int, default=200, help="number of test samples")
    sym.add_argument("--seed", type=int, default=0)
    sym.add_argument("--seq-len", type=int, default=10,
                     help="sequence length used for recurrent models")
    sym.add_argument("--report", default=None)
    sym.set_defaults(func=cmd_symtest)

    disc = sub.add_parser("discover",
                          help="recover a rotated dataset's symmetry frame")
    disc.add_argument("config", help="path to a flat key=value config file")
    disc.add_argument("--set", action="append", metavar="KEY=VALUE",
                      help="override a config value (repeatable)")
    disc.add_argument("--recover-deg", type=float, default=0.1,
                      help="angle-error threshold counted as a recovery")
    disc.set_defaults(func=cmd_discover)

    return parser


def main(argv=None):
    from . import datasets, training

    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (training.TrainingDivergedError, datasets.ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
