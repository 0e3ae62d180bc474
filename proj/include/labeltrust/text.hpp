#pragma once

#include <cctype>
#include <string>
#include <vector>

namespace labeltrust {

// Lowercases and splits on anything that is not [a-z0-9]. Shared by the
// TF-IDF vectorizer and token-presence labeling rules so both see the same
// tokens.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char ch : text) {
        const unsigned char lower = static_cast<unsigned char>(std::tolower(ch));
        if (std::isalnum(lower)) {
            current.push_back(static_cast<char>(lower));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace labeltrust
