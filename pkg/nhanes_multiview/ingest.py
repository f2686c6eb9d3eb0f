"""Resolve and fetch NHANES component files into a content-addressed cache."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Iterator, Sequence
from contextlib import contextmanager, suppress
from dataclasses import dataclass, field
from datetime import datetime, timezone
import hashlib
import json
import logging
import os
from pathlib import Path
import tempfile
import threading
import time
from typing import Literal, NamedTuple, Protocol

import requests

from nhanes_multiview.dumpers import load_file
from nhanes_multiview.exceptions import (
    CacheWriteError,
    EmptyBody,
    NetworkError,
    NotFound,
    UnsupportedCycle,
)

fcntl = None
with suppress(ImportError):
    import fcntl

logger = logging.getLogger(__name__)

#: Public NHANES repository.
DEFAULT_BASE_URL = "https://wwwn.cdc.gov/Nchs/Nhanes"
DEFAULT_CACHE_DIR = Path("~/.cache/nhanes_multiview")
DATA_FOLDER = Path(__file__).parent / "data"
DEFAULT_MANIFEST = DATA_FOLDER / "manifest.json"

CACHE_ENV = "NHANES_CACHE_DIR"
BASE_URL_ENV = "NHANES_BASE_URL"
MANIFEST_LOG = "manifest.jsonl"

Category = Literal["demographics", "examination", "laboratory", "questionnaire"]
CATEGORIES: tuple[Category, ...] = ("demographics", "examination", "laboratory", "questionnaire")

_FIRST_CYCLE = 1999
_LAST_CYCLE = 2013


@dataclass(frozen=True, order=True)
class CycleId:
    """
    Two-year NHANES release cycle.

    Parameters
    ----------
    start_year : int
        First year of the cycle (1999, 2001, ..., 2013).

    Raises
    ------
    UnsupportedCycle
        Cycle outside 1999-2014.
    """

    start_year: int

    def __post_init__(self):
        if not (
            _FIRST_CYCLE <= self.start_year <= _LAST_CYCLE
            and (self.start_year - _FIRST_CYCLE) % 2 == 0
        ):
            raise UnsupportedCycle(
                f"Cycle starting {self.start_year} unsupported; "
                f"valid: {', '.join(cycle.label for cycle in ALL_CYCLES)}",
            )

    @classmethod
    def parse(cls, label: str | CycleId) -> CycleId:
        """
        Build from a ``YYYY-YYYY`` label.

        Parameters
        ----------
        label : str or CycleId
            Label such as ``"2013-2014"``.

        Returns
        -------
        CycleId
            Parsed cycle.

        Raises
        ------
        UnsupportedCycle
            Malformed or unsupported label.

        Examples
        --------
        >>> CycleId.parse("2001-2002").suffix
        '_B'
        """
        if isinstance(label, CycleId):
            return label
        try:
            start, end = (int(part) for part in label.split("-"))
        except ValueError as err:
            raise UnsupportedCycle(f"Malformed cycle label {label!r}") from err
        if end != start + 1:
            raise UnsupportedCycle(f"Cycle {label!r} does not span two consecutive years")
        return cls(start)

    @property
    def label(self) -> str:
        """
        Repository label.

        Returns
        -------
        str
            ``"YYYY-YYYY"``.
        """
        return f"{self.start_year}-{self.start_year + 1}"

    @property
    def suffix(self) -> str:
        """
        File-name suffix: none for 1999-2000, then ``_B`` to ``_H``.

        Returns
        -------
        str
            Suffix appended to the file stem.
        """
        index = (self.start_year - _FIRST_CYCLE) // 2
        return "" if index == 0 else f"_{chr(ord('A') + index)}"

    def __str__(self) -> str:
        return self.label


ALL_CYCLES: tuple[CycleId, ...] = tuple(
    CycleId(year) for year in range(_FIRST_CYCLE, _LAST_CYCLE + 1, 2)
)


@dataclass(frozen=True)
class ComponentRef:
    """
    One component file of one cycle.

    Parameters
    ----------
    base_name : str
        File stem without cycle suffix, e.g. ``DEMO``.
    cycle : CycleId
        Release cycle.
    category : Category
        NHANES data category.
    component : str
        Manifest component name.
    """

    base_name: str
    cycle: CycleId
    category: Category
    component: str = ""

    @property
    def file_name(self) -> str:
        """
        Remote file name.

        Returns
        -------
        str
            Stem, cycle suffix and ``.XPT``.
        """
        return f"{self.base_name}{self.cycle.suffix}.XPT"


@dataclass(frozen=True)
class ComponentSpec:
    """
    Manifest entry: a component and its file stem per cycle.

    Parameters
    ----------
    name : str
        Component identifier referenced by rule files.
    category : Category
        NHANES data category.
    stems : dict[str, str]
        Stem per cycle label; absent cycles are not expected to exist.
    description : str
        Human-readable title.
    """

    name: str
    category: Category
    stems: dict[str, str]
    description: str = ""

    def refs(self, cycles: Iterable[CycleId]) -> list[ComponentRef]:
        """
        References for the cycles this component is expected in.

        Parameters
        ----------
        cycles : Iterable[CycleId]
            Requested cycles.

        Returns
        -------
        list[ComponentRef]
            One reference per requested cycle with a known stem.
        """
        return [
            ComponentRef(self.stems[cycle.label], cycle, self.category, self.name)
            for cycle in cycles
            if cycle.label in self.stems
        ]


def load_manifest(path: Path | str = DEFAULT_MANIFEST) -> list[ComponentSpec]:
    """
    Load and validate a component manifest.

    Parameters
    ----------
    path : Path | str
        JSON or YAML manifest.

    Returns
    -------
    list[ComponentSpec]
        Components in file order.
    """
    from nhanes_multiview.schemas import validate

    data = validate(load_file(path), "manifest")
    return [ComponentSpec(**comp) for comp in data["components"]]


def build_component_url(component: ComponentRef, base_url: str | None = None) -> str:
    """
    Repository URL of a component file.

    Parameters
    ----------
    component : ComponentRef
        Component and cycle.
    base_url : str, optional
        Repository root (default: ``$NHANES_BASE_URL`` or the public repository).

    Returns
    -------
    str
        Download URL.

    Raises
    ------
    UnsupportedCycle
        Cycle outside the supported range.

    Examples
    --------
    >>> build_component_url(ComponentRef("DEMO", CycleId(2013), "demographics"))
    'https://wwwn.cdc.gov/Nchs/Nhanes/2013-2014/DEMO_H.XPT'
    """
    cycle = CycleId.parse(component.cycle)
    base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
    return f"{base_url}/{cycle.label}/{component.base_name}{cycle.suffix}.XPT"


def resolve_cache_root(configured: Path | str | None = None) -> Path:
    """
    Cache root: ``$NHANES_CACHE_DIR``, else the configured folder, else the default.

    Parameters
    ----------
    configured : Path | str, optional
        Folder from configuration.

    Returns
    -------
    Path
        Expanded cache root.
    """
    root = os.environ.get(CACHE_ENV) or configured or DEFAULT_CACHE_DIR
    return Path(root).expanduser()


class Response(NamedTuple):
    """Minimal HTTP response used by transports."""

    #: HTTP status code.
    status: int
    #: Body bytes.
    content: bytes


class Transport(Protocol):
    """Anything able to GET a URL; injected so tests run offline."""

    def get(self, url: str) -> Response:  # numpydoc ignore=GL08
        ...


class RequestsTransport:
    """
    HTTPS transport backed by :mod:`requests`.

    Parameters
    ----------
    timeout : float
        Seconds per request.
    session : requests.Session, optional
        Session to reuse.
    """

    def __init__(self, timeout: float = 60.0, session: requests.Session | None = None):
        self.timeout = timeout
        self.session = session or requests.Session()

    def get(self, url: str) -> Response:
        """
        Fetch a URL.

        Parameters
        ----------
        url : str
            Address to GET.

        Returns
        -------
        Response
            Status and body.

        Raises
        ------
        NetworkError
            Connection-level failure.
        """
        try:
            resp = self.session.get(url, timeout=self.timeout)
        except requests.RequestException as err:
            raise NetworkError(f"Error while fetching {url}: {err}") from err
        return Response(resp.status_code, resp.content)


_HTTP_OK = 200
_HTTP_NOT_FOUND = 404
_HTTP_SERVER_ERROR = 500

_manifest_lock = threading.Lock()


def cache_path(url: str, cache_root: Path | str) -> Path:
    """
    Cache location for a URL.

    Parameters
    ----------
    url : str
        Source URL.
    cache_root : Path | str
        Cache root.

    Returns
    -------
    Path
        ``<root>/objects/<sha256(url)><suffix>``.
    """
    digest = hashlib.sha256(url.encode("utf8")).hexdigest()
    return Path(cache_root) / "objects" / f"{digest}{Path(url).suffix.lower()}"


@contextmanager
def _entry_lock(path: Path) -> Iterator[None]:
    """Advisory lock serializing fetches of one cache entry."""
    lock_path = path.with_name(f"{path.name}.lock")
    with lock_path.open("a") as handle:
        if fcntl is not None:
            fcntl.flock(handle, fcntl.LOCK_EX)
        try:
            yield
        finally:
            if fcntl is not None:
                fcntl.flock(handle, fcntl.LOCK_UN)


def _download(
    url: str,
    transport: Transport,
    attempts: int,
    backoff: float,
    sleep: Callable[[float], None],
) -> bytes:
    for attempt in range(1, attempts + 1):
        try:
            resp = transport.get(url)
        except NetworkError as err:
            failure = str(err)
        else:
            if resp.status == _HTTP_OK:
                if not resp.content:
                    raise EmptyBody(f"{url} returned an empty body")
                return resp.content
            if resp.status == _HTTP_NOT_FOUND:
                raise NotFound(f"{url} not found (HTTP 404)")
            failure = f"HTTP {resp.status}"
            if resp.status < _HTTP_SERVER_ERROR:
                raise NetworkError(f"Error while fetching {url}: {failure}")

        if attempt < attempts:
            delay = backoff * 2 ** (attempt - 1)
            logger.warning(
                "Fetching %s failed (%s), retry %d in %.1fs", url, failure, attempt, delay
            )
            sleep(delay)

    raise NetworkError(f"Error while fetching {url} after {attempts} attempts: {failure}")


def _record_fetch(cache_root: Path, url: str, path: Path, content: bytes) -> None:
    entry = {
        "url": url,
        "path": str(path.relative_to(cache_root)),
        "bytes": len(content),
        "sha256": hashlib.sha256(content).hexdigest(),
        "fetched": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    log = cache_root / MANIFEST_LOG
    with _manifest_lock, _entry_lock(log), log.open("a", encoding="utf8") as out:
        out.write(json.dumps(entry, sort_keys=True) + "\n")


def fetch_cached(
    url: str,
    cache_root: Path | str,
    *,
    transport: Transport | None = None,
    attempts: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> Path:
    """
    Return a local copy of `url`, downloading it once.

    Parameters
    ----------
    url : str
        File to fetch.
    cache_root : Path | str
        Writable cache root.
    transport : Transport, optional
        HTTP transport (default: :class:`RequestsTransport`).
    attempts : int
        Tries before a :class:`NetworkError` surfaces.
    backoff : float
        First retry delay in seconds, doubled per retry.
    sleep : Callable[[float], None]
        Delay function.

    Returns
    -------
    Path
        Cached file.

    Raises
    ------
    NotFound
        Remote file absent (not retried).
    NetworkError
        Transport failures on every attempt.
    EmptyBody
        Remote file empty.
    CacheWriteError
        Cache entry could not be stored.
    """
    cache_root = Path(cache_root)
    path = cache_path(url, cache_root)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise CacheWriteError(f"Cannot create cache folder {path.parent}: {err}") from err

    with _entry_lock(path):
        if path.is_file():
            logger.debug("Cache hit for %s", url)
            return path

        logger.info("Downloading %s", url)
        content = _download(url, transport or RequestsTransport(), attempts, backoff, sleep)

        try:
            with tempfile.NamedTemporaryFile(dir=path.parent, delete=False, suffix=".part") as tmp:
                tmp.write(content)
            Path(tmp.name).replace(path)
            _record_fetch(cache_root, url, path, content)
        except OSError as err:
            with suppress(OSError, NameError):
                Path(tmp.name).unlink(missing_ok=True)
            raise CacheWriteError(f"Cannot store {url} in cache {cache_root}: {err}") from err

    return path


def read_fetch_log(cache_root: Path | str) -> list[dict]:
    """
    Read the cache's JSON-lines fetch log.

    Parameters
    ----------
    cache_root : Path | str
        Cache root.

    Returns
    -------
    list[dict]
        One entry per download, oldest first.
    """
    log = Path(cache_root) / MANIFEST_LOG
    if not log.is_file():
        return []
    with log.open(encoding="utf8") as file:
        return [json.loads(line) for line in file if line.strip()]


@dataclass
class CategoryFetch:
    """
    Result of fetching one category.

    Parameters
    ----------
    files : list[tuple[ComponentRef, Path]]
        Present files with their cache paths.
    absent : list[ComponentRef]
        Files the repository reported missing.
    """

    files: list[tuple[ComponentRef, Path]] = field(default_factory=list)
    absent: list[ComponentRef] = field(default_factory=list)


def fetch_category(
    category: Category,
    cycles: Sequence[CycleId | str],
    manifest: Sequence[ComponentSpec],
    cache_root: Path | str,
    *,
    transport: Transport | None = None,
    base_url: str | None = None,
    **fetch_kwargs,
) -> CategoryFetch:
    """
    Fetch every manifest component of a category for the given cycles.

    Parameters
    ----------
    category : Category
        Category to fetch.
    cycles : Sequence[CycleId | str]
        Cycles to fetch.
    manifest : Sequence[ComponentSpec]
        Expected components.
    cache_root : Path | str
        Cache root.
    transport : Transport, optional
        HTTP transport.
    base_url : str, optional
        Repository root.
    **fetch_kwargs
        Extra arguments for :func:`fetch_cached`.

    Returns
    -------
    CategoryFetch
        Present files plus an absence report; 404s are data absence, not errors.
    """
    cycles = [CycleId.parse(cycle) for cycle in cycles]
    transport = transport or RequestsTransport()
    result = CategoryFetch()

    for spec in manifest:
        if spec.category != category:
            continue
        for ref in spec.refs(cycles):
            url = build_component_url(ref, base_url)
            try:
                path = fetch_cached(url, cache_root, transport=transport, **fetch_kwargs)
            except NotFound:
                logger.warning("%s absent for %s (%s)", ref.file_name, ref.cycle, spec.name)
                result.absent.append(ref)
            else:
                result.files.append((ref, path))

    return result


def download_manifest(
    manifest: Sequence[ComponentSpec],
    cycles: Sequence[CycleId | str],
    cache_root: Path | str,
    *,
    categories: Sequence[Category] = CATEGORIES,
    progress: bool = False,
    **kwargs,
) -> dict[str, CategoryFetch]:
    """
    Fetch every category of a manifest.

    Parameters
    ----------
    manifest : Sequence[ComponentSpec]
        Expected components.
    cycles : Sequence[CycleId | str]
        Cycles to fetch.
    cache_root : Path | str
        Cache root.
    categories : Sequence[Category]
        Categories to fetch.
    progress : bool
        Show a progress bar.
    **kwargs
        Extra arguments for :func:`fetch_category`.

    Returns
    -------
    dict[str, CategoryFetch]
        Result per category.
    """
    wanted = list(categories)
    if progress:
        from tqdm import tqdm

        wanted = tqdm(wanted, desc="NHANES categories")

    return {
        category: fetch_category(category, cycles, manifest, cache_root, **kwargs)
        for category in wanted
    }
