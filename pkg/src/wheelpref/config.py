"""Flat key=value run configuration shared by the CLI and the service.

A config file is plain text, one `key = value` per line, `#` comments and
blank lines ignored. Every key has a typed default below; values are cast
to the default's type and unknown keys are rejected so typos fail loudly.
"""

class ConfigError(ValueError):
    pass


DEFAULTS = {
    # data
    "resolution": 32,
    "n_designs": 200,
    # label pipeline
    "n_components": 4,
    # vae
    "channels": "8,16,32",
    "latent_dim": 10,
    "alpha1": 1.0,
    "alpha2": 10.0,
    "vae_epochs": 60,
    "vae_batch_size": 32,
    "vae_lr": 1e-3,
    "vae_patience": 20,
    # survey / simulator
    "n_respondents": 8,
    "n_groups": 3,
    "tau": 1.0,
    "spread": 0.1,
    "antagonistic": False,
    "oracle_target": 0.0,
    # choice model
    "split": "15,16:7,8",
    "augmentation_factor": 10,
    "choice_epochs": 30,
    "choice_batch_size": 256,
    "choice_patience": 10,
    "lr_encoder": 1e-4,
    "lr_beta": 1e-3,
    "beta_scale": 0.01,
    "warm_start": True,
    # ensemble
    "k_neighbors": 100,
    "self_alpha": 1.0,
    "alpha_epochs": 100,
    "alpha_lr": 1e-2,
    "alpha_patience": 10,
    # reporting
    "k_max": 10,
    # seeds
    "seed": 0,
    "fixed_seed": 0,
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def parse_value(key, raw, default):
    raw = raw.strip()
    # bool first: bool is a subclass of int
    if isinstance(default, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"key {key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"key {key}: expected an integer, got {raw!r}")
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"key {key}: expected a number, got {raw!r}")
    return raw


def parse_line(line):
    """Returns (key, raw value) or None for blank/comment lines."""
    stripped = line.split("#", 1)[0].strip()
    if not stripped:
        return None
    if "=" not in stripped:
        raise ConfigError(f"expected key = value, got {line.strip()!r}")
    key, raw = stripped.split("=", 1)
    return key.strip(), raw.strip()


def load_config(path=None, overrides=None):
    """Defaults, then the file, then override pairs; returns a plain dict."""
    cfg = dict(DEFAULTS)

    def apply(key, raw, where):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r} ({where})")
        cfg[key] = parse_value(key, raw, DEFAULTS[key])

    if path is not None:
        try:
            with open(path) as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        for n, line in enumerate(lines, start=1):
            parsed = parse_line(line)
            if parsed is not None:
                apply(*parsed, where=f"{path}:{n}")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, raw = item.split("=", 1)
        apply(key.strip(), raw.strip(), where="command line")
    return cfg


def _int_tuple(key, raw):
    try:
        return tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise ConfigError(f"key {key}: expected comma-separated integers, got {raw!r}")


def channels(cfg):
    chans = _int_tuple("channels", cfg["channels"])
    if len(chans) != 3 or any(c < 1 for c in chans):
        raise ConfigError(f"key channels: expected three positive integers, got {cfg['channels']!r}")
    return chans


def split_questions(cfg):
    """The `split` key, `val,...:test,...` question lists."""
    raw = cfg["split"]
    if raw.count(":") != 1:
        raise ConfigError(f"key split: expected val_qs:test_qs, got {raw!r}")
    val_raw, test_raw = raw.split(":")
    return _int_tuple("split", val_raw), _int_tuple("split", test_raw)
