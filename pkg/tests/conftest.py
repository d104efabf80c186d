from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from postcert.certs import Certificate, TbsCertificate, TrustStore, sign_certificate
from postcert.crypto import KeyRegistry
from postcert.timeutil import DAY_MS, HOUR_MS


@pytest.fixture
def registry() -> KeyRegistry:
    return KeyRegistry.with_signers(
        ["ca1", "ca2", "log1", "log2", "log3", "leaf-key-1", "leaf-key-2"]
    )


@pytest.fixture
def ca_root(registry) -> Certificate:
    tbs = TbsCertificate(
        serial=0, subject="ca1", issuer="ca1",
        not_before=0, not_after=100 * DAY_MS, public_key_id="ca1",
    )
    return sign_certificate(registry, "ca1", tbs)


@pytest.fixture
def trust(ca_root) -> TrustStore:
    return TrustStore([ca_root])


@pytest.fixture
def leaf_cert(registry) -> Certificate:
    tbs = TbsCertificate(
        serial=7, subject="site.example", issuer="ca1",
        not_before=HOUR_MS, not_after=90 * DAY_MS, public_key_id="leaf-key-1",
    )
    return sign_certificate(registry, "ca1", tbs)
