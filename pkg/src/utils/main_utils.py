import hashlib
import json
import os
import sys
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd
import yaml
from pandas import DataFrame

from src.exception import CustomException, MissingArtifactError
from src.logger import log


def require_file(file_path: str, what: str = "file") -> str:
    """
    Raises MissingArtifactError when ``file_path`` does not exist.

    :param file_path: Path that must exist.
    :param what: Human-readable name used in the message.
    :return: The same path.
    """
    if not os.path.exists(file_path):
        raise MissingArtifactError(f"{what} not found: {file_path}")
    return file_path


def read_yaml_file(file_path: str) -> dict:
    """
    Reads a YAML file and returns its contents as a dictionary.

    Parameters:
    ----------
    file_path : str
        Path to the YAML file.

    Returns:
    -------
    dict
        Parsed YAML content (an empty dict for an empty file).
    """
    require_file(file_path, "YAML file")
    try:
        log.info(f"Reading YAML file from {file_path}")
        with open(file_path, "r", encoding="utf-8") as yaml_file:
            return yaml.safe_load(yaml_file) or {}
    except Exception as e:
        raise CustomException(e, sys) from e


def write_yaml_file(file_path: str, content: object, replace: bool = False) -> None:
    """
    Writes content to a YAML file with keys in insertion order.

    Parameters:
    ----------
    file_path : str
        Path where the YAML file will be saved.
    content : object
        Data to write.
    replace : bool, optional
        If True, replaces the existing file. Defaults to False.
    """
    try:
        log.info(f"Writing YAML file to {file_path}")
        if replace and os.path.exists(file_path):
            os.remove(file_path)
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as file:
            yaml.safe_dump(content, file, default_flow_style=False, sort_keys=False)
    except Exception as e:
        raise CustomException(e, sys) from e


def write_tsv(file_path: str, rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> DataFrame:
    """
    Writes rows as a tab-separated table with a header line.

    :param file_path: Destination path; parent directories are created.
    :param rows: One mapping per row.
    :param columns: Column order of the file.
    :return: The written DataFrame.
    """
    os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
    dataframe = DataFrame(list(rows), columns=list(columns))
    dataframe.to_csv(file_path, sep="\t", index=False, float_format="%.10g", lineterminator="\n")
    log.info(f"Wrote {len(dataframe)} rows to {file_path}")
    return dataframe


def read_tsv(file_path: str) -> DataFrame:
    require_file(file_path, "table")
    return pd.read_csv(file_path, sep="\t")


def write_jsonl(file_path: str, records: Iterable[Dict[str, Any]]) -> int:
    """Writes one compact JSON object per line; returns the record count."""
    os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
    count = 0
    with open(file_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
            count += 1
    log.info(f"Wrote {count} records to {file_path}")
    return count


def read_jsonl(file_path: str) -> List[Dict[str, Any]]:
    require_file(file_path, "JSON-lines file")
    with open(file_path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def file_sha256(file_path: str, extra: Optional[bytes] = None) -> str:
    """Hex digest of a file's bytes (optionally followed by ``extra``)."""
    require_file(file_path)
    digest = hashlib.sha256()
    with open(file_path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    if extra:
        digest.update(extra)
    return digest.hexdigest()
