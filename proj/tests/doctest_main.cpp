#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <string>

// Absolute-ish path of this test binary; the CLI suite uses it to locate the
// vcformer executable in the sibling tools/ directory.
std::string g_test_binary_path;

int main(int argc, char** argv) {
    g_test_binary_path = argv[0];
    doctest::Context context(argc, argv);
    return context.run();
}
