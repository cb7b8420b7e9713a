import json
import logging
from pathlib import Path

from sqlalchemy.exc import SQLAlchemyError

from .config import Settings
from .models.db_models import StoredRun, get_session, init_db
from .models.run_record import RunRecord

logger = logging.getLogger(__name__)

_engine = None


def configure_storage(db_url: str = None):
    """Point the storage helpers at db_url (default: the configured database URL)."""
    global _engine
    _engine = init_db(db_url or Settings().database_url)
    return _engine


def _current_engine():
    if _engine is None:
        configure_storage()
    return _engine


def saving_run_record(record: RunRecord):
    """Store a run record; returns its id, or None when the database refuses it"""
    session = get_session(_current_engine())
    try:
        row = StoredRun.from_record(record)
        session.add(row)
        session.commit()
        return row.id
    except SQLAlchemyError as e:
        logger.error("database error saving run record: %s", e)
        session.rollback()
        return None
    finally:
        session.close()


def getting_run_record(record_id):
    session = get_session(_current_engine())
    try:
        row = session.query(StoredRun).filter(StoredRun.id == int(record_id)).first()
        if row:
            return row.to_dict()
        return None
    except SQLAlchemyError as e:
        logger.error("database error getting run record %s: %s", record_id, e)
        return None
    finally:
        session.close()


def get_all_run_records(digest: str = None):
    """All stored runs as dictionaries, oldest first; optionally only those for one input digest"""
    session = get_session(_current_engine())
    try:
        query = session.query(StoredRun)
        if digest:
            query = query.filter(StoredRun.input_digest == digest)
        return [row.to_dict() for row in query.order_by(StoredRun.id).all()]
    except SQLAlchemyError as e:
        logger.error("database error listing run records: %s", e)
        return []
    finally:
        session.close()


def deleting_run_record(record_id):
    session = get_session(_current_engine())
    try:
        row = session.query(StoredRun).filter(StoredRun.id == int(record_id)).first()
        if not row:
            logger.error("run record %s not found for deletion", record_id)
            return False
        session.delete(row)
        session.commit()
        return True
    except SQLAlchemyError as e:
        logger.error("database error deleting run record: %s", e)
        session.rollback()
        return False
    finally:
        session.close()


def import_run_records(json_path):
    """Bulk import of `--json` result files (one record or a list of records per file)."""
    path = Path(json_path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        logger.error("cannot read run records from %s: %s", path, e)
        return 0
    entries = data if isinstance(data, list) else [data]

    session = get_session(_current_engine())
    try:
        for entry in entries:
            session.add(StoredRun.from_record(RunRecord.from_dict(entry)))
        session.commit()
        return len(entries)
    except SQLAlchemyError as e:
        logger.error("import error: %s", e)
        session.rollback()
        return 0
    finally:
        session.close()
