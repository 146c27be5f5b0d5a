import json
import logging
import os
import re
import tempfile
from concurrent.futures import ThreadPoolExecutor

import yaml
from environs import Env

env = Env()

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"


def max_threads():
    return max(1, env.int("FRACSEM_THREADS", os.cpu_count() or 1))


def setup_logging(level=None):
    level = level or env.str("FRACSEM_LOG_LEVEL", "WARNING")
    logging.basicConfig(
        level=level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def thread_map(fn, items):
    """Maps fn over items, using at most FRACSEM_THREADS workers. Keeps the input order."""
    items = list(items)
    workers = min(max_threads(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def format_float(value):
    return format(float(value), FLOAT_FORMAT)


envvar_matcher = re.compile(r"\$\{([A-Za-z0-9_]+)(:-[^\}]*)?\}")


def envvar_constructor(loader, node):
    """
    Extract the matched value, expand env variable, and replace the match
    ${REQUIRED_ENV_VARIABLE} or ${ENV_VARIABLE:-default}
    """
    value = node.value
    match = envvar_matcher.match(value)
    env_var = match.group(1)
    default_value = match.group(2)
    if default_value is not None:
        return env.str(env_var, default_value[2:]) + value[match.end() :]
    else:
        return env.str(env_var) + value[match.end() :]


yaml.add_implicit_resolver("!envvar", envvar_matcher, Loader=yaml.SafeLoader)
yaml.add_constructor("!envvar", envvar_constructor, Loader=yaml.SafeLoader)


def load_document(config_file=None):
    """Loads a JSON or YAML config document into a dict

    @params config_file path of the document. If None, FRACSEM_CONFIG is used.
    """
    if config_file is None:
        config_file = env.path("FRACSEM_CONFIG")
    config_file = str(config_file)
    with open(config_file) as f:
        if config_file.endswith(".json"):
            return json.load(f)
        return yaml.load(f, Loader=yaml.SafeLoader)


def atomic_write(path, data, mode="w"):
    """Writes data to path through a temp file in the same directory plus rename"""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    logger.debug("Wrote %s", path)
    return path
