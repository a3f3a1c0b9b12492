import pytest

from leakwatch.pii import KIND_CATEGORY, PiiCategory, PiiKind, PiiType


def test_every_kind_has_exactly_one_category():
    assert set(KIND_CATEGORY) == set(PiiKind)
    assert set(KIND_CATEGORY.values()) == set(PiiCategory)


def test_category_derived_from_kind():
    pii = PiiType(PiiKind.IMEI)
    assert pii.category is PiiCategory.DEVICE_IDENTIFIER
    assert PiiType(PiiKind.PASSWORD).category is PiiCategory.CREDENTIAL
    assert PiiType(PiiKind.GPS_COORDINATE).category is PiiCategory.LOCATION


def test_from_names_validates_pairing():
    pii = PiiType.from_names("UserIdentifier", "EmailAddress")
    assert pii.kind is PiiKind.EMAIL_ADDRESS
    with pytest.raises(ValueError):
        PiiType.from_names("Location", "EmailAddress")
    with pytest.raises(ValueError):
        PiiType.from_names("UserIdentifier", "NotAKind")


def test_round_trip_names():
    for kind in PiiKind:
        category, name = PiiType(kind).to_names()
        assert PiiType.from_names(category, name).kind is kind
