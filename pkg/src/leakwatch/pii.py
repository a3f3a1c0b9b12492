"""PII taxonomy: categories, kinds, and the (category, kind) type used everywhere."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class PiiCategory(Enum):
    DEVICE_IDENTIFIER = "DeviceIdentifier"
    USER_IDENTIFIER = "UserIdentifier"
    CONTACT_INFORMATION = "ContactInformation"
    LOCATION = "Location"
    CREDENTIAL = "Credential"


class PiiKind(Enum):
    # device identifiers
    ICCID = "Iccid"
    IMEI = "Imei"
    IMSI = "Imsi"
    MAC_ADDRESS = "MacAddress"
    ANDROID_ID = "AndroidId"
    ADVERTISER_ID = "AdvertiserId"
    OS_DEVICE_ID = "OsDeviceId"
    # user identifiers
    NAME = "Name"
    GENDER = "Gender"
    DATE_OF_BIRTH = "DateOfBirth"
    EMAIL_ADDRESS = "EmailAddress"
    MAILING_ADDRESS = "MailingAddress"
    RELATIONSHIP_STATUS = "RelationshipStatus"
    # contact information
    PHONE_NUMBER = "PhoneNumber"
    ADDRESS_BOOK_ENTRY = "AddressBookEntry"
    # location
    GPS_COORDINATE = "GpsCoordinate"
    ZIP_CODE = "ZipCode"
    # credentials
    USERNAME = "Username"
    PASSWORD = "Password"


# Each kind belongs to exactly one category.
KIND_CATEGORY: dict[PiiKind, PiiCategory] = {
    PiiKind.ICCID: PiiCategory.DEVICE_IDENTIFIER,
    PiiKind.IMEI: PiiCategory.DEVICE_IDENTIFIER,
    PiiKind.IMSI: PiiCategory.DEVICE_IDENTIFIER,
    PiiKind.MAC_ADDRESS: PiiCategory.DEVICE_IDENTIFIER,
    PiiKind.ANDROID_ID: PiiCategory.DEVICE_IDENTIFIER,
    PiiKind.ADVERTISER_ID: PiiCategory.DEVICE_IDENTIFIER,
    PiiKind.OS_DEVICE_ID: PiiCategory.DEVICE_IDENTIFIER,
    PiiKind.NAME: PiiCategory.USER_IDENTIFIER,
    PiiKind.GENDER: PiiCategory.USER_IDENTIFIER,
    PiiKind.DATE_OF_BIRTH: PiiCategory.USER_IDENTIFIER,
    PiiKind.EMAIL_ADDRESS: PiiCategory.USER_IDENTIFIER,
    PiiKind.MAILING_ADDRESS: PiiCategory.USER_IDENTIFIER,
    PiiKind.RELATIONSHIP_STATUS: PiiCategory.USER_IDENTIFIER,
    PiiKind.PHONE_NUMBER: PiiCategory.CONTACT_INFORMATION,
    PiiKind.ADDRESS_BOOK_ENTRY: PiiCategory.CONTACT_INFORMATION,
    PiiKind.GPS_COORDINATE: PiiCategory.LOCATION,
    PiiKind.ZIP_CODE: PiiCategory.LOCATION,
    PiiKind.USERNAME: PiiCategory.CREDENTIAL,
    PiiKind.PASSWORD: PiiCategory.CREDENTIAL,
}


@dataclass(frozen=True)
class PiiType:
    """A concrete PII type; the category is implied by the kind."""

    kind: PiiKind
    category: PiiCategory = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "category", KIND_CATEGORY[self.kind])

    @classmethod
    def from_names(cls, category: str, kind: str) -> "PiiType":
        pii = cls(PiiKind(kind))
        if pii.category.value != category:
            raise ValueError(
                f"kind {kind!r} belongs to category {pii.category.value!r}, not {category!r}"
            )
        return pii

    def to_names(self) -> tuple[str, str]:
        return self.category.value, self.kind.value

    def __str__(self) -> str:
        return f"{self.category.value}/{self.kind.value}"
