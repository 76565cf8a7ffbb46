package org.example.extent;

import java.io.FileInputStream;
import java.io.IOException;

public class ExceptionalOnly {
    int leak(String path) throws IOException {
        FileInputStream in = new FileInputStream(path);
        try {
            int b = in.read();
            in.close();
            return b;
        } catch (IOException e) {
            return -1;
        }
    }
}
