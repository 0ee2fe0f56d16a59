"""
Run configuration. A TOML file is laid over DEFAULTS, then command line
overrides (dotted keys such as "run.seed") are laid over that. Every key
must already exist in DEFAULTS and keep its type.

Relative paths in a file resolve against the file's directory, relative
paths given as overrides against the working directory. `${VAR}` is
expanded in secret keys only and only when the value is used, so the
resolved snapshot never holds a secret.
"""
import os
import re
import copy
import logging
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
import collections

from .structures import ValidationError, TomlFile, TomlTable
from .corpus import check_ratios
from .discriminator import TokenizerConfig, TrainConfig
from .generator import GeneratorConfig, MOCK, CHAT_ENDPOINT
from .engine import EngineConfig, AttackGoal, TARGETED, UNTARGETED
from .metrics import EMBEDDING_KIND_TO_PROVIDER

DEFAULTS = collections.OrderedDict((
    ("run", collections.OrderedDict((
        ("seed", 0),
        ("parallelism", 1),
        ("out_dir", "runs/latest"),
    ))),
    ("corpus", collections.OrderedDict((
        ("path", ""),
        ("schema", "findr"),
        ("label_names", []),
        ("label_aliases", {}),
        ("fold_other", False),
        ("ratios", [0.8, 0.1, 0.1]),
        ("split", "test"),
    ))),
    ("tokenizer", collections.OrderedDict((
        ("mode", "char_ngram"),
        ("ngram_min", 1),
        ("ngram_max", 2),
        ("lowercase", True),
    ))),
    ("train", collections.OrderedDict((
        ("epochs", 10),
        ("learning_rate_0", 0.1),
        ("l2_lambda", 1e-4),
        ("vocab_size_max", 50000),
        ("min_doc_freq", 2),
    ))),
    ("discriminator", collections.OrderedDict((
        ("kind", "builtin"),
        ("model_path", ""),
        ("input_fields", ["claim"]),
        ("endpoint", ""),
        ("timeout", 30.0),
        ("max_in_flight", 8),
        ("max_retries", 3),
    ))),
    ("generator", collections.OrderedDict((
        ("kind", MOCK),
        ("endpoint_url", ""),
        ("model_name", ""),
        ("api_key_env", "OPENAI_API_KEY"),
        ("api_key", ""),
        ("temperature", 0.7),
        ("max_output_tokens", 1024),
        ("timeout", 60.0),
        ("max_retries", 3),
        ("backoff_base", 1.0),
        ("backoff_jitter", 1.0),
        ("concurrency", 4),
        ("rate_per_second", 0.0),
        ("full_history", False),
        ("template_dir", ""),
        ("mock", collections.OrderedDict((
            ("script", []),
            ("joiner", " "),
            ("shuffle_script", False),
        ))),
    ))),
    ("engine", collections.OrderedDict((
        ("threshold", 0.5),
        ("max_iterations", 5),
        ("strategy", "msmi"),
        ("goal", TARGETED),
        ("target_label", "reasonable"),
    ))),
    ("metrics", collections.OrderedDict((
        ("embedding", "tfidf"),
        ("endpoint", ""),
        ("dimension", 0),
        ("timeout", 30.0),
        ("max_retries", 3),
    ))),
))

PATH_KEYS = (
    ("run", "out_dir"),
    ("corpus", "path"),
    ("discriminator", "model_path"),
    ("generator", "template_dir"),
)

_VARIABLE_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")

# --generator takes the short name
GENERATOR_FLAG_TO_KIND = {
    "mock": MOCK,
    "endpoint": CHAT_ENDPOINT,
}

SNAPSHOT_NAME = "config.resolved.toml"
MODEL_NAME = "model.bin"


def _coerce(name, default, value):
    """Value with the type of its default; ints widen to floats"""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    elif isinstance(default, list):
        if isinstance(value, (list, tuple)):
            if name == "ratios":
                return [_coerce(name, 0.0, v) for v in value]
            return list(value)
    elif isinstance(default, dict):
        if isinstance(value, dict):
            return dict(value)
    raise ValidationError("{} must be a {}, got {!r}".format(
        name, type(default).__name__, value))


def _merge(target, source, prefix):
    for key, value in source.items():
        name = prefix + key
        if key not in target:
            raise ValidationError("unknown config key {}".format(name))
        if isinstance(target[key], collections.OrderedDict):
            if not isinstance(value, dict):
                raise ValidationError("{} must be a table".format(name))
            _merge(target[key], value, name + ".")
        else:
            target[key] = _coerce(name, target[key], value)


def _resolve_paths(settings, base_dir):
    for section, key in PATH_KEYS:
        value = settings[section][key]
        if value and not os.path.isabs(value):
            settings[section][key] = os.path.normpath(
                os.path.join(base_dir, value))


def set_dotted(settings, dotted, value):
    """settings["a"]["b"] = value for "a.b", with the same checks as file
    values"""
    keys = dotted.split(".")
    table = settings
    for key in keys[:-1]:
        if not isinstance(table.get(key), dict):
            raise ValidationError("unknown config key {}".format(dotted))
        table = table[key]
    if keys[-1] not in table or isinstance(table[keys[-1]],
                                           collections.OrderedDict):
        raise ValidationError("unknown config key {}".format(dotted))
    table[keys[-1]] = _coerce(dotted, table[keys[-1]], value)


def load_config(path=None, overrides=None):
    """Resolved settings: defaults, then the file, then overrides"""
    settings = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as config_file:
                data = tomllib.load(config_file)
        except OSError as error:
            raise ValidationError("can't read config {}: {}".format(
                path, error.strerror or error)) from None
        except tomllib.TOMLDecodeError as error:
            raise ValidationError("config {} is not valid TOML: {}".format(
                path, error)) from None
        _merge(settings, data, "")
        _resolve_paths(settings, os.path.dirname(os.path.abspath(path)))
        logging.info("Loaded config %s", path)
    else:
        _resolve_paths(settings, os.getcwd())

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        if (tuple(dotted.split(".")) in PATH_KEYS and isinstance(value, str)
                and value):
            value = os.path.abspath(value)
        set_dotted(settings, dotted, value)

    check_settings(settings)
    return settings


def check_settings(settings):
    """Cross-key checks that single values can't express"""
    run = settings["run"]
    if run["parallelism"] < 1:
        raise ValidationError("run.parallelism must be >= 1")
    if not run["out_dir"]:
        raise ValidationError("run.out_dir must not be empty")
    check_ratios(settings["corpus"]["ratios"])
    if settings["corpus"]["split"] not in ("test", "all"):
        raise ValidationError("corpus.split must be 'test' or 'all'")
    if settings["engine"]["goal"] not in (TARGETED, UNTARGETED):
        raise ValidationError("engine.goal must be {!r} or {!r}".format(
            TARGETED, UNTARGETED))
    if settings["metrics"]["embedding"] not in EMBEDDING_KIND_TO_PROVIDER:
        raise ValidationError("unknown metrics.embedding {!r}".format(
            settings["metrics"]["embedding"]))
    if settings["discriminator"]["kind"] not in ("builtin", "remote"):
        raise ValidationError("unknown discriminator.kind {!r}".format(
            settings["discriminator"]["kind"]))


def interpolate_secret(value):
    """Expand ${VAR} from the environment"""
    def replace(match):
        name = match.group(1)
        if name not in os.environ:
            raise ValidationError(
                "environment variable {} is not set".format(name))
        return os.environ[name]
    return _VARIABLE_RE.sub(replace, value)


def model_path(settings):
    """Configured model file, or model.bin in the run directory"""
    return settings["discriminator"]["model_path"] or os.path.join(
        settings["run"]["out_dir"], MODEL_NAME)


def label_names(settings):
    """Configured label names, None when the corpus should supply them"""
    return tuple(settings["corpus"]["label_names"]) or None


def tokenizer_config(settings):
    """TokenizerConfig from [tokenizer]"""
    return TokenizerConfig(**settings["tokenizer"])


def train_config(settings):
    """TrainConfig from [train], seeded by the run seed"""
    return TrainConfig(seed=settings["run"]["seed"], **settings["train"])


def generator_config(settings, interpolate=True):
    """GeneratorConfig from [generator] and [generator.mock]. With
    interpolate=False the api_key is left as written."""
    section = dict(settings["generator"])
    mock = section.pop("mock")
    for key in ("full_history", "template_dir"):
        section.pop(key)
    if interpolate:
        section["api_key"] = interpolate_secret(section["api_key"])
    return GeneratorConfig(
        seed=settings["run"]["seed"],
        script=tuple(mock["script"]),
        joiner=mock["joiner"],
        shuffle_script=mock["shuffle_script"],
        **section
    )


def attack_goal(settings, names, untargeted=False):
    """Goal from [engine]; attacks are always untargeted"""
    engine = settings["engine"]
    if untargeted or engine["goal"] == UNTARGETED:
        return AttackGoal.untargeted()
    target = engine["target_label"]
    if target not in names:
        raise ValidationError("engine.target_label {!r} is not one of "
                              "{}".format(target, list(names)))
    return AttackGoal.targeted(names.index(target))


def engine_config(settings, names, untargeted=False):
    """EngineConfig from [engine]"""
    engine = settings["engine"]
    return EngineConfig(
        threshold=engine["threshold"],
        max_iterations=engine["max_iterations"],
        strategy=engine["strategy"],
        goal=attack_goal(settings, tuple(names), untargeted),
        input_fields=tuple(settings["discriminator"]["input_fields"]),
        full_history=settings["generator"]["full_history"],
    )


def embedding_provider(settings, model):
    """Provider named in [metrics]"""
    metrics = settings["metrics"]
    return EMBEDDING_KIND_TO_PROVIDER[metrics["embedding"]](metrics, model)


def settings_to_toml(settings):
    """TomlFile of the settings, nested tables become [a.b] tables"""
    toml_file = TomlFile("Resolved configuration, rerun with --config")

    def add(name, section):
        table = toml_file.add_table(TomlTable(name))
        nested = []
        for key, value in section.items():
            if isinstance(value, collections.OrderedDict):
                nested.append((name + "." + key, value))
            else:
                table[key] = value
        for nested_name, nested_section in nested:
            add(nested_name, nested_section)

    for name, section in settings.items():
        add(name, section)
    return toml_file


def write_snapshot(settings, directory):
    """config.resolved.toml beside the run's outputs"""
    path = os.path.join(directory, SNAPSHOT_NAME)
    with open(path, "w", encoding="utf-8") as out_file:
        out_file.write(settings_to_toml(settings).to_string())
    return path
