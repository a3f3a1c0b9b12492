import pytest

from leakwatch.engine import Engine, EngineConfig
from leakwatch.synth import CorpusSpec, DomainSpec, Pattern, generate_prepared
from leakwatch.pii import PiiKind


@pytest.fixture(scope="session")
def small_spec():
    return CorpusSpec(
        rng_seed=42,
        domains=[
            DomainSpec("ads.tracknet.example", Pattern.SIMPLE_KEY, 300, 80,
                       PiiKind.ADVERTISER_ID, "idfa", transport="query",
                       path="/2.0/ad", app="TrackNetSDK"),
            DomainSpec("metrics.apexmob.example", Pattern.CONDITIONAL_ABSENCE, 300, 80,
                       PiiKind.IMEI, "auid", transport="form",
                       path="/getImage.php5", app="ApexMetrics"),
            DomainSpec("cdn.pixelpush.example", Pattern.SIMPLE_KEY, 60, 18,
                       PiiKind.EMAIL_ADDRESS, "track_email", transport="query",
                       path="/px", app="PixelPush"),
            DomainSpec("news.dailybyte.example", Pattern.BENIGN, 60, 0,
                       path="/feed", app="DailyByte"),
        ],
    )


@pytest.fixture(scope="session")
def small_corpus(small_spec):
    return generate_prepared(small_spec)


@pytest.fixture(scope="session")
def trained_engine(small_corpus):
    flows, truths = small_corpus
    engine = Engine(EngineConfig())
    engine.load_corpus(flows, truths)
    engine.train()
    return engine
