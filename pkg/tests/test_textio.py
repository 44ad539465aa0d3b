import pytest

from npeo.errors import ParseError
from npeo.textio import read_key_values, take_flag, take_float, take_int, take_vector


def test_read_key_values(tmp_path):
    path = tmp_path / "conf.txt"
    path.write_text(
        "# leading comment\n"
        "alpha = 0.1   # trailing comment\n"
        "\n"
        "mu = 1 2 3\n"
    )
    entries = read_key_values(path)
    assert entries == {"alpha": ["0.1"], "mu": ["1", "2", "3"]}


def test_read_key_values_errors(tmp_path):
    no_eq = tmp_path / "a.txt"
    no_eq.write_text("alpha 0.1\n")
    with pytest.raises(ParseError, match="line 1"):
        read_key_values(no_eq)
    dup = tmp_path / "b.txt"
    dup.write_text("alpha = 1\nalpha = 2\n")
    with pytest.raises(ParseError, match="duplicate"):
        read_key_values(dup)
    bare = tmp_path / "c.txt"
    bare.write_text("alpha =\n")
    with pytest.raises(ParseError):
        read_key_values(bare)


def test_take_helpers():
    entries = {"x": ["1.5"], "n": ["3"], "v": ["1", "2"], "f": ["yes"]}
    assert take_float(entries, "x") == 1.5
    assert take_float(entries, "missing", 9.0) == 9.0
    assert take_int(entries, "n") == 3
    assert take_vector(entries, "v") == (1.0, 2.0)
    assert take_flag(entries, "f") is True
    assert take_flag(entries, "absent") is False
    with pytest.raises(ParseError):
        take_float(entries, "missing")
    with pytest.raises(ParseError):
        take_float(entries, "v")  # vector where scalar expected
    with pytest.raises(ParseError):
        take_int(entries, "x")  # 1.5 is not an integer
    with pytest.raises(ParseError):
        take_flag({"f": ["maybe"]}, "f")
