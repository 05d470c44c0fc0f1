#include <structcrawl/cli.hpp>

int main(int argc, char** argv) { return structcrawl::cli::run(argc, argv); }
