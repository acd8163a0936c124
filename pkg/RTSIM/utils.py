"""
This files is meant for exceptions and helper functions that are shared by the simulator modules
and for loading saved simulation results.
"""

import os
import re
import pickle

import pandas as pd


class ConfigError(ValueError):
    """Raised on unknown configuration keys, malformed values or violated invariants."""


class ObjParseError(ValueError):
    """Raised on malformed records in an OBJ file."""


class BvhError(ValueError):
    """Raised on invalid BVH build input or invalid node addresses."""


class SimulationError(RuntimeError):
    """Raised on fatal simulation conditions (stack overflow, unaligned access, broken identities)."""


_SIZE_UNITS = {"B": 1, "KB": 1024, "MB": 1024**2, "GB": 1024**3}
_SIZE_REGEX = re.compile(r'^\s*(\d+)\s*([KMG]?B)?\s*$', re.IGNORECASE)


def parse_size(text):
    """Parses a byte size such as '32KB', '512kb', '1MB' or '4096'.

    Args:
        text (str, int): size string or integer number of bytes

    Returns:
        int: size in bytes
    """
    if isinstance(text, int):
        return text
    match = _SIZE_REGEX.match(str(text))
    if match is None:
        raise ValueError(f"Invalid size '{text}'.")
    value, unit = match.groups()
    return int(value) * _SIZE_UNITS[(unit or "B").upper()]


def format_size(n_bytes):
    """Formats a byte count with the largest exact unit (e.g. 32768 -> '32KB')."""
    for unit in ("GB", "MB", "KB"):
        if n_bytes % _SIZE_UNITS[unit] == 0 and n_bytes >= _SIZE_UNITS[unit]:
            return f"{n_bytes // _SIZE_UNITS[unit]}{unit}"
    return f"{n_bytes}B"


# open results:
def load_results(name: str, directory: str = ''):
    """
    Loads simulation results from a pickle file written by Core.save_results().

    Args:
        name (str): name of the results file
        directory (str): directory where the results file is located

    Returns:
        results (dict): dictionary with keys 'config', 'ledger', 'hit_buffer' and 'table'
    """
    if directory == '':
        file_path = name
    else:
        file_path = os.path.join(directory, name)

    with open(file_path, 'rb') as f:
        return pickle.load(f)


def load_results_multiple_files(directory: str = None, contains: str = ''):
    """
    Loads all results files with name matching the string and concatenates their
    result tables into one table.

    Args:
        directory (str): directory where the results files are located
        contains (str): string that the results files should contain in their name

    Returns:
        pd.DataFrame: concatenated result tables, in sorted file name order.
    """
    files = sorted(file for file in os.listdir(directory) if contains in file and file.endswith('.pkl'))
    tables = []
    for file in files:
        results = load_results(file, directory)
        if results.get('table') is not None:
            tables.append(results['table'])
    if len(tables) == 0:
        return pd.DataFrame()
    return pd.concat(tables, ignore_index=True)
