#pragma once

#include <span>

#include "segrest/backup/backup.hpp"
#include "segrest/storage/page.hpp"
#include "segrest/wal/log_record.hpp"
#include "segrest/wal/wal.hpp"

namespace segrest {

// Redo of one record. Records at or below the page LSN are already reflected
// and skipped, so replay is idempotent. Returns whether the record applied.
// A record for another page is a caller bug (std::logic_error).
bool replay_record(Page& page, const LogRecord& record, std::size_t max_records);

// Applies `records` (ascending LSN) to `page`.
Page replay(Page page, std::span<const LogRecord> records, std::size_t max_records);

// Rebuilds one page from the backup and the log's per-page chain without
// touching any restore state.
Page single_page_repair(const BackupImage& backup, Wal& wal, PageId page);

}  // namespace segrest
