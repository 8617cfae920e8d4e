#pragma once

#include "compass/corpus.hpp"
#include "compass/harmonize.hpp"
#include "compass/knowledge_tree.hpp"
#include "compass/records.hpp"

namespace compass::mockgen {

/// Builds a digest-keyed fixture for the mock backend by replaying, offline,
/// every prompt the pipeline would issue against this corpus: paper
/// classification for all papers, table classification for tables of
/// target-labeled papers, and one header-normalization call per target table
/// whose headers the alias and isotope layers cannot fully resolve.
///
/// annotations supplies the canned responses:
///   {"papers":  {paper_id: label or {"label": ...}},
///    "tables":  {paper_id: {table_id: label or {"label": ...}}},
///    "headers": {paper_id: {table_id: {header: {"field": ..., ...}}}}}
///
/// Returns {"miss_policy": "error", "entries": {digest: response-text}}.
/// Error("MissingAnnotation", subject) when a needed response is absent.
json build_mock_responses(const Corpus& corpus, const tree::KnowledgeTree& tree,
                          const json& annotations, const harmonize::HeaderAliasTable& aliases);

} // namespace compass::mockgen
