"""
Functions for reading of key-value-files (run config files)

Run config files are plain text files where every setting is stored as a
key-value pair on one line. Key and value are separated by the first colon
(":"). Keys are dotted paths (`section.name`). Everything after a `#` is a
comment and blank lines are ignored.

The same line format is used for `--set key=value` overrides on the command
line, with the equals sign as separator.
"""

import logging


# -----------------------------------------------------------------------------
def strip_comment(line):
    """
    Remove a trailing `#` comment and surrounding whitespace from a line

    Parameter
    ---------
    line : str, required
        Raw line of a config file

    Returns
    -------
    str
        Line content without the comment. Empty string for comment lines.
    """

    return line.split("#", maxsplit=1)[0].strip()


# -----------------------------------------------------------------------------
def get_key_string_from_line(line, separator=":"):
    """
    Get key string from separated key-value line

    Parameter
    ---------
    line : str, required
        string to extract the key from
    separator : str
        Character between key and value. Default is the colon.

    Returns
    -------
    str
        Key string extracted from the line. Empty string if the line has
        no separator.
    """

    key_string = ""
    line_split = line.strip().split(separator, maxsplit=1)
    if len(line_split) > 1:
        key_string = line_split[0].strip()
    return key_string


# -----------------------------------------------------------------------------
def get_value_string_from_line(line, separator=":"):
    """
    Get value string from separated key-value line

    Key and value are expected to be separated by the separator. The key and
    the separator are truncated and the part after the separator, namely the
    value, is returned.

    Leading and trailing whitespaces are stripped from the value

    Parameter
    ---------
    line : str, required
        string to extract the value from
    separator : str
        Character between key and value. Default is the colon.

    Returns
    -------
    str
        Value string extracted from the line. Empty string if no value was
        found.
    """

    value_string = ""
    line_split = line.strip().split(separator, maxsplit=1)
    if len(line_split) > 1:
        value_string = line_split[1].strip()
    return value_string


# -----------------------------------------------------------------------------
def read_key_value_lines(lines, separator=":"):
    """
    Collect key and value strings from config lines

    Parameters
    ----------
    lines : iterable of str
        Lines of a config file (or override strings)
    separator : str
        Character between key and value

    Returns
    -------
    list of (int, str, str)
        Line number, key string and raw value string for every line with
        content. Lines without separator are returned with an empty key so
        the caller can report them.
    """

    logger = logging.getLogger(__name__).getChild("read_key_value_lines")

    pairs = []
    for number, raw_line in enumerate(lines, start=1):
        line = strip_comment(raw_line)
        if not line:
            continue
        key = get_key_string_from_line(line, separator=separator)
        value = get_value_string_from_line(line, separator=separator)
        logger.debug("Line {}: key '{}', value '{}'".format(
            number, key, value))
        pairs.append((number, key, value))
    return pairs
