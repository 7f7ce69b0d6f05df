from parser import RecordParser


def test_parse_drops_blank_fields():
    parser = RecordParser()
    assert parser.parse("a,  ,b") == ["a", "b"]
