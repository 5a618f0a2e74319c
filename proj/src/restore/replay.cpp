#include "segrest/restore/replay.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace segrest {

bool replay_record(Page& page, const LogRecord& record, std::size_t max_records) {
  if (record.page_id != page.id()) {
    throw std::logic_error("record for page " + std::to_string(record.page_id.value) +
                           " replayed onto page " + std::to_string(page.id().value));
  }
  if (record.lsn <= page.lsn()) return false;
  apply_update(page, record, max_records);
  return true;
}

Page replay(Page page, std::span<const LogRecord> records, std::size_t max_records) {
  for (const auto& r : records) replay_record(page, r, max_records);
  return page;
}

Page single_page_repair(const BackupImage& backup, Wal& wal, PageId page) {
  Page image = backup.fetch_page(page);
  if (wal.head(page) == kNullLsn) return image;
  std::vector<LogRecord> chain;
  auto cursor = wal.page_chain(page, std::nullopt, backup.min_lsn());
  while (auto r = cursor.next()) chain.push_back(std::move(*r));
  std::reverse(chain.begin(), chain.end());
  return replay(std::move(image), chain, Page::capacity(backup.geometry().page_size));
}

}  // namespace segrest
