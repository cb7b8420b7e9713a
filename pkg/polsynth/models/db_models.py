from datetime import datetime, timezone

from sqlalchemy import JSON, Column, DateTime, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from ..config import DEFAULT_DATABASE_URL
from .run_record import RunRecord

Base = declarative_base()


def _now():
    return datetime.now(timezone.utc)


class StoredRun(Base):
    __tablename__ = "run_records"

    id = Column(Integer, primary_key=True)
    command = Column(String(32), nullable=False)
    input_digest = Column(String(64), nullable=False, index=True)
    version = Column(String(32), nullable=False)
    created_at = Column(DateTime, default=_now, nullable=False)

    # Whole record as JSON, timings included
    payload = Column(JSON, nullable=False)

    def to_dict(self):
        return {
            "id": self.id,
            "command": self.command,
            "input_digest": self.input_digest,
            "version": self.version,
            "created_at": self.created_at.isoformat() if self.created_at else None,
            "record": self.payload,
        }

    def to_record(self) -> RunRecord:
        return RunRecord.from_dict(self.payload)

    @classmethod
    def from_record(cls, record: RunRecord):
        return cls(
            command=record.command,
            input_digest=record.digest,
            version=record.version,
            payload=record.to_dict(),
        )


def init_db(db_url=DEFAULT_DATABASE_URL):
    """Create the engine and any missing tables"""
    engine = create_engine(db_url)
    Base.metadata.create_all(engine)
    return engine


def get_session(engine):
    Session = sessionmaker(bind=engine)
    return Session()
