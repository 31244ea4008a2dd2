"""Review ingestion: JSONL parsing, time/season splits, subsampling, tokenization."""

import datetime
import json

import pytest

from driftlab import data_ingest as di
from driftlab.errors import DataFormatError


def _rec(date_str, text="some text", label=None):
    return di.ReviewRecord(text, datetime.date.fromisoformat(date_str), label)


def test_record_validation():
    with pytest.raises(DataFormatError):
        di.ReviewRecord("", datetime.date(2020, 1, 1))
    with pytest.raises(DataFormatError):
        di.ReviewRecord("ok", "2020-01-01")  # string date rejected


def test_parse_record_accepts_timestamped_dates():
    rec = di.parse_record({"text": "hi", "date": "2019-07-15T08:30:00", "label": 3})
    assert rec.date == datetime.date(2019, 7, 15)
    assert rec.label == 3
    with pytest.raises(DataFormatError):
        di.parse_record({"text": "hi"})
    with pytest.raises(DataFormatError):
        di.parse_record({"text": "hi", "date": "not-a-date"})


def test_load_reviews_jsonl(tmp_path):
    path = tmp_path / "reviews.jsonl"
    rows = [
        {"text": "Great mouse!!", "date": "2015-12-31"},
        {"text": "iPod works", "date": "2016-01-01", "label": "pos"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n\n")
    records = di.load_reviews(path)
    assert len(records) == 2  # trailing blank line ignored
    assert records[1].label == "pos"


def test_load_reviews_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"text": "x", "date": "2020-01-01"}\n{oops\n')
    with pytest.raises(DataFormatError, match=":2:"):
        di.load_reviews(path)
    path.write_text('{"text": "x", "date": "2020-01-01"}\n{"text": "y"}\n')
    with pytest.raises(DataFormatError, match=":2:"):
        di.load_reviews(path)


def test_split_by_time_boundary_semantics():
    records = [_rec("2015-12-31"), _rec("2016-01-01")]
    before, after = di.split_by_time(records, datetime.date(2016, 1, 1))
    assert (len(before), len(after)) == (1, 1)  # boundary day goes to the late side
    assert before[0].date.year == 2015


def test_split_by_time_rejects_empty_sides():
    records = [_rec("2018-05-01"), _rec("2018-06-01")]
    with pytest.raises(DataFormatError):
        di.split_by_time(records, datetime.date(2010, 1, 1))
    with pytest.raises(DataFormatError):
        di.split_by_time([], datetime.date(2010, 1, 1))


def test_split_by_season_buckets():
    records = [
        _rec("2019-07-15"),  # summer
        _rec("2019-12-25"),  # winter
        _rec("2020-01-10"),  # winter
        _rec("2019-04-10"),  # neither: dropped
    ]
    summer, winter = di.split_by_season(records)
    assert [r.date.month for r in summer] == [7]
    assert sorted(r.date.month for r in winter) == [1, 12]
    with pytest.raises(DataFormatError):
        di.split_by_season([_rec("2019-07-01")])  # no winter side


def test_subsample_edges_and_determinism():
    records = [_rec("2020-01-01", text=f"r{i}") for i in range(40)]
    assert di.subsample(records, 1.0, 3) == records  # identity, order kept
    assert di.subsample(records, 0.0, 3) == []
    a = di.subsample(records, 0.25, 7)
    b = di.subsample(records, 0.25, 7)
    assert a == b and len(a) == 10
    assert a != di.subsample(records, 0.25, 8)
    with pytest.raises(DataFormatError):
        di.subsample(records, 1.5, 0)


def test_subsample_is_nested_by_pct():
    records = [_rec("2020-01-01", text=f"r{i}") for i in range(50)]
    small = {r.text for r in di.subsample(records, 0.2, 11)}
    large = {r.text for r in di.subsample(records, 0.6, 11)}
    assert small <= large  # same shuffle prefix property


def test_subsample_preserves_input_order():
    records = [_rec("2020-01-01", text=f"r{i}") for i in range(30)]
    picked = di.subsample(records, 0.5, 2)
    idx = [int(r.text[1:]) for r in picked]
    assert idx == sorted(idx)


def test_tokenize_lowercases_and_splits():
    records = [
        _rec("2020-01-01", text="Great mouse!!"),
        _rec("2020-01-01", text="iPod  2nd-gen"),
        _rec("2020-01-01", text="!!!"),  # no tokens: line skipped
    ]
    corpus = di.tokenize(records)
    lines = list(corpus.lines())
    assert lines == [["great", "mouse"], ["ipod", "2nd", "gen"]]
    assert corpus.n_lines == 2
