package org.example.feed;

import android.database.Cursor;
import android.widget.SimpleCursorAdapter;

public class SwapCursorClosed {
    private SimpleCursorAdapter adapter;

    void refresh(Cursor n) {
        Cursor old = adapter.swapCursor(n);
        if (old != null) old.close();
    }

    void replace(Cursor n) {
        adapter.changeCursor(n);
    }
}
