#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "compass/corpus.hpp"
#include "compass/errors.hpp"
#include "compass/harmonize.hpp"
#include "compass/knowledge_tree.hpp"
#include "compass/mockgen.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate digest-keyed mock backend fixtures for a corpus"};

    std::string corpus_path, tree_path, annotations_path, aliases_path, out_path;
    app.add_option("--corpus", corpus_path, "Directory of parsed-paper JSON files")->required();
    app.add_option("--tree", tree_path, "Knowledge tree JSON")->required();
    app.add_option("--annotations", annotations_path, "Canned labels and header mappings")
        ->required();
    app.add_option("--aliases", aliases_path, "Header alias table JSON (default: builtin)");
    app.add_option("--out", out_path, "Fixture file to write; '-' for stdout")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const compass::Corpus corpus = compass::load_corpus(corpus_path);
        const compass::tree::KnowledgeTree tree = compass::tree::load_tree_file(tree_path);

        std::ifstream ann_in(annotations_path);
        if (!ann_in) throw compass::Error("UnreadableFile", annotations_path, "cannot open");
        const compass::json annotations = compass::json::parse(ann_in);

        const compass::harmonize::HeaderAliasTable aliases =
            aliases_path.empty() ? compass::harmonize::HeaderAliasTable::builtin()
                                 : compass::harmonize::HeaderAliasTable::from_file(aliases_path);

        const compass::json fixture =
            compass::mockgen::build_mock_responses(corpus, tree, annotations, aliases);

        if (out_path == "-") {
            std::cout << fixture.dump(2) << "\n";
        } else {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) throw compass::Error("UnwritablePath", out_path, "cannot open for writing");
            out << fixture.dump(2) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
